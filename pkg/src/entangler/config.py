"""Scenario files: INI-style sections parsed with configparser.

Physical quantities are in units of g, times in 1/g.  Example::

    [system]
    omega_a = 70
    omega_b = 89
    omega_e = 20
    omega_f = 100

    [target]
    kind = noon
    N = 2

    [drive]
    Omega = 1e-3

    [sweep]
    target.N = 1, 2, 3, 4, 5
    drive.Omega = 1e-3, 3e-3, 5e-3

Overrides use ``section.key=value``.  Unknown sections or keys are rejected.
"""

from __future__ import annotations

import configparser
import hashlib
import itertools
from dataclasses import dataclass, field, replace

from .dynamics import DecoherenceRates, IntegratorConfig
from .hamiltonian import DriveSpec, QutritType, Schedule, SystemParams, TargetSpec
from .hilbert import ModeTruncation
from .protocol import MeasurementSpec


class ConfigError(ValueError):
    pass


def _opt_float(text: str) -> float | None:
    return None if text.strip().lower() in ("", "none", "auto") else float(text)


def _opt_int(text: str) -> int | None:
    return None if text.strip().lower() in ("", "none", "auto") else int(text)


def _bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _str(text: str) -> str:
    return text.strip()


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())


SCHEMA = {
    "system": {
        "omega_a": float,
        "omega_b": float,
        "omega_e": float,
        "omega_f": float,
        "g_a": float,
        "g_b": float,
        "g_ab": float,
        "qutrit_type": _str,
        "n_max_a": _opt_int,
        "n_max_b": _opt_int,
        "headroom": int,
    },
    "target": {
        "kind": _str,
        "N": int,
        "n_1": int,
        "m_1": int,
        "n_2": int,
        "m_2": int,
        "alpha": float,
        "beta": float,
    },
    "drive": {
        "Omega": float,
        "omega_1": _opt_float,
        "omega_2": _opt_float,
        "epsilon": float,
        "epsilon_prime": float,
        "schedule": _str,
        "secular": _bool,
    },
    "decoherence": {"gamma": float, "kappa_a": _opt_float, "kappa_b": _opt_float},
    "measurement": {"level": _str, "theta_1": float, "theta_2": float},
    "integrator": {"dt": _opt_float, "method": _str, "monitor_every": int},
    "collisions": {"threshold": float, "ratios": _floats, "weights": _str},
    "output": {"path": _str, "trajectory": _str, "workers": int, "scenario": _str},
}

DEFAULTS = {
    "system": {
        "omega_a": "70",
        "omega_b": "89",
        "omega_e": "20",
        "omega_f": "100",
        "g_a": "1",
        "g_b": "1",
        "g_ab": "0",
        "qutrit_type": "lambda",
        "n_max_a": "auto",
        "n_max_b": "auto",
        "headroom": "8",
    },
    "target": {"kind": "noon", "N": "1", "n_1": "0", "m_1": "0", "n_2": "1", "m_2": "1", "alpha": "1", "beta": "1"},
    "drive": {
        "Omega": "1e-3",
        "omega_1": "auto",
        "omega_2": "auto",
        "epsilon": "0",
        "epsilon_prime": "0",
        "schedule": "simultaneous",
        "secular": "false",
    },
    "decoherence": {"gamma": "0", "kappa_a": "auto", "kappa_b": "auto"},
    "measurement": {"level": "", "theta_1": "0", "theta_2": "0"},
    "integrator": {"dt": "auto", "method": "auto", "monitor_every": "100"},
    "collisions": {"threshold": "5", "ratios": "", "weights": "poisson"},
    "output": {"path": "", "trajectory": "", "workers": "1", "scenario": ""},
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario: raw string values per section plus sweep axes."""

    values: dict = field(default_factory=dict)
    sweep: tuple[tuple[str, tuple[str, ...]], ...] = ()

    def get(self, section: str, key: str):
        return SCHEMA[section][key](self.values[section][key])

    def with_value(self, dotted: str, value: str) -> "ScenarioConfig":
        section, key = _split_key(dotted)
        values = {s: dict(kv) for s, kv in self.values.items()}
        values[section][key] = str(value)
        cfg = replace(self, values=values)
        cfg.get(section, key)
        return cfg

    def points(self) -> list["ScenarioConfig"]:
        """Cartesian product of the sweep axes, last axis fastest."""
        if not self.sweep:
            return [self]
        names = [name for name, _ in self.sweep]
        out = []
        for combo in itertools.product(*(vals for _, vals in self.sweep)):
            cfg = replace(self, sweep=())
            for name, value in zip(names, combo):
                cfg = cfg.with_value(name, value)
            out.append(cfg)
        return out

    def canonical(self) -> str:
        lines = []
        for section in SCHEMA:
            for key in SCHEMA[section]:
                lines.append(f"{section}.{key}={self.values[section][key]}")
        for name, vals in self.sweep:
            lines.append(f"sweep.{name}={','.join(vals)}")
        return "\n".join(lines)

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    # builders -----------------------------------------------------------

    def truncation(self) -> ModeTruncation:
        target = self.target()
        na, nb = self.get("system", "n_max_a"), self.get("system", "n_max_b")
        default = target.default_truncation(self.get("system", "headroom"))
        return ModeTruncation(na if na is not None else default.n_max_a, nb if nb is not None else default.n_max_b)

    def params(self) -> SystemParams:
        return SystemParams(
            omega_a=self.get("system", "omega_a"),
            omega_b=self.get("system", "omega_b"),
            omega_e=self.get("system", "omega_e"),
            omega_f=self.get("system", "omega_f"),
            g_a=self.get("system", "g_a"),
            g_b=self.get("system", "g_b"),
            g_ab=self.get("system", "g_ab"),
            qutrit_type=QutritType.parse(self.get("system", "qutrit_type")),
            truncation=self.truncation(),
        )

    def target(self) -> TargetSpec:
        kind = self.get("target", "kind").lower()
        alpha, beta = self.get("target", "alpha"), self.get("target", "beta")
        if kind == "noon":
            N = self.get("target", "N")
            return TargetSpec(0, N, N, 0, alpha, beta)
        if kind == "bell":
            return TargetSpec(0, 0, 1, 1, alpha, beta)
        if kind == "custom":
            return TargetSpec(
                self.get("target", "n_1"), self.get("target", "m_1"), self.get("target", "n_2"), self.get("target", "m_2"), alpha, beta
            )
        raise ConfigError(f"unknown target kind {kind!r} (noon, bell, custom)")

    def drive(self) -> DriveSpec:
        return DriveSpec(
            Omega=self.get("drive", "Omega"),
            omega_1=self.get("drive", "omega_1"),
            omega_2=self.get("drive", "omega_2"),
            epsilon=self.get("drive", "epsilon"),
            epsilon_prime=self.get("drive", "epsilon_prime"),
            schedule=Schedule.parse(self.get("drive", "schedule")),
        )

    def rates(self) -> DecoherenceRates:
        return DecoherenceRates(
            gamma=self.get("decoherence", "gamma"),
            kappa_a=self.get("decoherence", "kappa_a"),
            kappa_b=self.get("decoherence", "kappa_b"),
        )

    def measurement(self) -> MeasurementSpec:
        level = self.get("measurement", "level") or None
        return MeasurementSpec(level, self.get("measurement", "theta_1"), self.get("measurement", "theta_2"))

    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(
            dt=self.get("integrator", "dt"),
            method=self.get("integrator", "method"),
            monitor_every=self.get("integrator", "monitor_every"),
        )


def _split_key(dotted: str) -> tuple[str, str]:
    if "." not in dotted:
        raise ConfigError(f"expected section.key, got {dotted!r}")
    section, key = dotted.split(".", 1)
    section, key = section.strip(), key.strip()
    if section not in SCHEMA:
        raise ConfigError(f"unknown section {section!r}")
    if key not in SCHEMA[section]:
        raise ConfigError(f"unknown key {key!r} in section [{section}]")
    return section, key


def _parser() -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep Omega vs omega distinct
    return parser


def load_config(text: str | None = None, path: str | None = None, overrides=()) -> ScenarioConfig:
    """Parse a scenario from text or a file, apply overrides, validate every value."""
    parser = _parser()
    try:
        if path is not None:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh, source=path)
        elif text is not None:
            parser.read_string(text)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(str(exc)) from exc

    values = {s: dict(kv) for s, kv in DEFAULTS.items()}
    sweep = []
    for section in parser.sections():
        if section == "sweep":
            for name, raw in parser.items("sweep"):
                _split_key(name)
                vals = tuple(v.strip() for v in raw.split(",") if v.strip())
                if not vals:
                    raise ConfigError(f"empty sweep axis {name!r}")
                sweep.append((name, vals))
            continue
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            values[section][key] = raw

    cfg = ScenarioConfig(values, tuple(sweep))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        name, value = item.split("=", 1)
        if name.strip().startswith("sweep."):
            axis = name.strip()[len("sweep."):]
            _split_key(axis)
            vals = tuple(v.strip() for v in value.split(",") if v.strip())
            kept = tuple((n, v) for n, v in cfg.sweep if n != axis)
            cfg = replace(cfg, sweep=kept + ((axis, vals),))
        else:
            cfg = _checked(lambda: cfg.with_value(name.strip(), value.strip()))
    validate(cfg)
    return cfg


def _checked(fn):
    try:
        return fn()
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def validate(cfg: ScenarioConfig) -> None:
    """Type-check every value and every sweep point's builders."""
    for section in SCHEMA:
        for key in SCHEMA[section]:
            _checked(lambda: cfg.get(section, key))
    for point in cfg.points():
        _checked(point.target)
        _checked(point.drive)
        _checked(point.rates)
        _checked(point.measurement)
        _checked(point.integrator)
        _checked(point.truncation)
        _checked(point.params)
