"""Bell/NOON state generation from coherent states in a qutrit-two-resonator system."""

__version__ = "0.1.0"


class NumericalGuardError(RuntimeError):
    """A numerical invariant (norm, trace, resonance, success floor) was violated."""
