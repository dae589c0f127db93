"""Command line entry point: ``entangler shifts|simulate|sweep|collisions``.

Exit codes: 0 success, 2 configuration error (including resonant
parameters), 3 numerical failure (integrator guard or a measurement that
never succeeds).
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
import time
from concurrent.futures import ProcessPoolExecutor

from . import NumericalGuardError, __version__
from .analytics import closed_form_fidelity, collision_scan, omega_e_for_ratio, shift_ratio
from .config import ConfigError, ScenarioConfig, load_config
from .dynamics import TrajectoryRecorder
from .hamiltonian import QutritType, ResonanceError, dispersive_shifts, drive_tones, planned_frequencies
from .protocol import MeasurementError, run_protocol

CSV_VERSION = 1

SIMULATE_COLUMNS = [
    "scenario",
    "qutrit_type",
    "n_1",
    "m_1",
    "n_2",
    "m_2",
    "N",
    "Omega",
    "gamma",
    "kappa_a",
    "kappa_b",
    "g_ab",
    "epsilon",
    "epsilon_prime",
    "theta_1",
    "schedule",
    "cutoff_a",
    "cutoff_b",
    "engine",
    "P",
    "F",
    "F_closed_form",
]


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def write_csv(stream, kind: str, cfg: ScenarioConfig, columns, rows) -> None:
    stream.write(f"# entangler {__version__} {kind} csv-v{CSV_VERSION}\n")
    stream.write(f"# config-sha256 {cfg.digest()}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])


def shifts_rows(cfg: ScenarioConfig) -> list[dict]:
    params = cfg.params()
    params.check_dispersive()
    shifts = dispersive_shifts(params)
    target = cfg.target()
    rows = [
        {"quantity": "qutrit_type", "value": params.qutrit_type.value},
        {"quantity": "chi_a", "value": shifts.chi_a},
        {"quantity": "chi_a_prime", "value": shifts.chi_a_prime},
        {"quantity": "chi_b", "value": shifts.chi_b},
        {"quantity": "chi_b_prime", "value": shifts.chi_b_prime},
        {"quantity": "ratio", "value": shifts.ratio},
    ]
    for (mode, k, j), value in sorted(shifts.table.items()):
        rows.append({"quantity": f"chi_{mode}_{k}{j}", "value": value})
    w1, w2 = planned_frequencies(params, shifts, target)
    rows.append({"quantity": "omega_1", "value": w1})
    rows.append({"quantity": "omega_2", "value": w2})
    if params.qutrit_type is QutritType.LAMBDA and params.g_a == params.g_b:
        rows.append({"quantity": "ratio_from_frequencies", "value": shift_ratio(params)})
    return rows


def simulate_point(cfg: ScenarioConfig, trajectory=None) -> dict:
    params = cfg.params()
    target = cfg.target()
    drive = cfg.drive()
    rates = cfg.rates()
    measurement = cfg.measurement()
    tr = params.truncation
    shifts = dispersive_shifts(params)
    recorder = None
    if trajectory is not None:
        (u1, l1), (u2, _) = drive_tones(params.qutrit_type)
        labels = {
            f"p_{'gef'[l1]}{target.n_1}{target.m_1}": (l1, *target.first),
            f"p_{'gef'[u1]}{target.n_1}{target.m_1}": (u1, *target.first),
            f"p_{'gef'[u2]}{target.n_2}{target.m_2}": (u2, *target.second),
        }
        recorder = TrajectoryRecorder(trajectory, tr, labels)
    outcome = run_protocol(
        params,
        target,
        drive,
        measurement,
        rates,
        cfg.integrator(),
        tr,
        shifts,
        secular=cfg.get("drive", "secular"),
        recorder=recorder,
    )
    N = target.m_1 if (target.n_1, target.m_2) == (0, 0) and target.m_1 == target.n_2 else ""
    return {
        "scenario": cfg.get("output", "scenario"),
        "qutrit_type": params.qutrit_type.value,
        "n_1": target.n_1,
        "m_1": target.m_1,
        "n_2": target.n_2,
        "m_2": target.m_2,
        "N": N,
        "Omega": drive.Omega,
        "gamma": rates.gamma,
        "kappa_a": rates.kappa_a,
        "kappa_b": rates.kappa_b,
        "g_ab": params.g_ab,
        "epsilon": drive.epsilon,
        "epsilon_prime": drive.epsilon_prime,
        "theta_1": measurement.theta_1,
        "schedule": drive.schedule.value,
        "cutoff_a": tr.n_max_a,
        "cutoff_b": tr.n_max_b,
        "engine": outcome.diagnostics["engine"],
        "P": outcome.success_probability,
        "F": outcome.fidelity,
        "F_closed_form": closed_form_fidelity(params, shifts, target, drive.Omega, tr)
        if params.qutrit_type is not QutritType.XI
        else "",
    }


def _timed_point(cfg: ScenarioConfig) -> tuple[dict, float]:
    start = time.perf_counter()
    row = simulate_point(cfg)
    return row, time.perf_counter() - start


def sweep_rows(cfg: ScenarioConfig, workers: int | None = None) -> list[dict]:
    points = cfg.points()
    workers = workers or cfg.get("output", "workers")
    if workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_timed_point, points))
    else:
        results = [_timed_point(p) for p in points]
    for i, (_, seconds) in enumerate(results):
        print(f"point {i + 1}/{len(points)}: {seconds:.2f} s", file=sys.stderr)
    return [row for row, _ in results]


def collision_rows(cfg: ScenarioConfig) -> tuple[list[str], list[dict]]:
    params = cfg.params()
    target = cfg.target()
    Omega = cfg.get("drive", "Omega")
    ratios = cfg.get("collisions", "ratios")
    if ratios:
        rows = []
        for r in ratios:
            p = type(params)(**{**params.__dict__, "omega_e": omega_e_for_ratio(params, r)})
            rows.append(
                {
                    "ratio": shift_ratio(p),
                    "omega_e": p.omega_e,
                    "F_closed_form": closed_form_fidelity(
                        p, None, target, Omega, params.truncation, cfg.get("collisions", "weights")
                    ),
                }
            )
        return ["ratio", "omega_e", "F_closed_form"], rows
    report = collision_scan(params, None, target, Omega, cfg.get("collisions", "threshold"), params.truncation)
    rows = [
        {
            "level_pair": e.level_pair,
            "n": e.n,
            "m": e.m,
            "shift_n": e.shift[0],
            "shift_m": e.shift[1],
            "detuning": e.detuning,
            "population": e.population,
        }
        for e in report
    ]
    return ["level_pair", "n", "m", "shift_n", "shift_m", "detuning", "population"], rows


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="entangler", description="Entangled Fock-state protocol simulator")
    parser.add_argument("--version", action="version", version=f"entangler {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("shifts", "dispersive shifts, drive frequencies and shift ratio"),
        ("simulate", "one protocol run"),
        ("sweep", "Cartesian sweep over the [sweep] axes"),
        ("collisions", "near-resonant spectator transitions or a shift-ratio sweep"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="scenario file (defaults apply when omitted)")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override a value")
        p.add_argument("--out", help="CSV output path (default: [output] path or stdout)")
        if name == "sweep":
            p.add_argument("--workers", type=int, help="process pool size")
        if name == "simulate":
            p.add_argument("--trajectory", help="CSV dump of populations, trace and norm during the run")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(path=args.config, overrides=args.set)
        buffer = io.StringIO()
        if args.command == "shifts":
            write_csv(buffer, "shifts", cfg, ["quantity", "value"], shifts_rows(cfg))
        elif args.command == "simulate":
            trajectory = args.trajectory or cfg.get("output", "trajectory") or None
            start = time.perf_counter()
            if trajectory:
                with open(trajectory, "w", newline="", encoding="utf-8") as fh:
                    row = simulate_point(cfg, fh)
            else:
                row = simulate_point(cfg)
            print(f"wall time {time.perf_counter() - start:.2f} s", file=sys.stderr)
            write_csv(buffer, "simulate", cfg, SIMULATE_COLUMNS, [row])
        elif args.command == "sweep":
            write_csv(buffer, "sweep", cfg, SIMULATE_COLUMNS, sweep_rows(cfg, args.workers))
        else:
            columns, rows = collision_rows(cfg)
            write_csv(buffer, "collisions", cfg, columns, rows)
    except (ConfigError, ResonanceError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericalGuardError, MeasurementError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    out = args.out or cfg.get("output", "path")
    if out:
        with open(out, "w", newline="", encoding="utf-8") as fh:
            fh.write(buffer.getvalue())
    else:
        sys.stdout.write(buffer.getvalue())
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
