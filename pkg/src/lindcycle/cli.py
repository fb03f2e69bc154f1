"""``lindcycle`` command-line front end.

Exit codes: 0 success, 1 the analysis came out negative (conditions not
satisfied, no unique cycle, failed expectation), 2 bad usage or config.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import cycles
from .config import TOLERANCE_KEYS, ConfigError, RunConfig, parse_run_config
from .errors import LindcycleError, ProtocolError
from .models import BUILTIN_MODELS, ModelSpec, builtin_model, check_expectations
from .operators import from_coords, random_density, relative_entropy, trace_distance
from .propagation import DEFAULT_SLICES_PER_UNIT, monodromy

EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE = 0, 1, 2
DEFAULT_TOLERANCES = {"unit": 1e-6, "agreement": 1e-8, "slack": 1e-9, "threshold": 1e-6, "rate": 1e-9}
DEMOS = ("counterexample", "repaired", "quasiperiodic")


class UsageError(Exception):
    pass


def fmt(x: float) -> str:
    return "{:.17g}".format(x)


class Run:
    """Resolved settings for one command plus the output helpers."""

    def __init__(self, args: argparse.Namespace, cfg: RunConfig, model: ModelSpec | None):
        self.command = args.command
        self.model = model
        self.samples = args.samples or cfg.samples
        self.slices = args.slices or cfg.slices or DEFAULT_SLICES_PER_UNIT
        self.horizon = args.horizon if args.horizon is not None else cfg.horizon
        self.periods = cfg.periods
        self.rho0 = cfg.rho0
        self.seed = resolve_seed(args.seed, cfg.seed)
        self.tol = {**DEFAULT_TOLERANCES, **cfg.tolerances, **args.tolerance}
        self.out = Path(args.out or cfg.out or "lindcycle-out")
        self.lines: list[str] = []

    def header(self) -> list[str]:
        tols = " ".join(f"{k}={fmt(self.tol[k])}" for k in TOLERANCE_KEYS)
        name = self.model.name if self.model else "-"
        return [f"command: {self.command}", f"model: {name}", f"seed: {self.seed}",
                f"slices_per_unit: {self.slices}", f"tolerances: {tols}"]

    def say(self, line: str = "") -> None:
        print(line)
        self.lines.append(line)

    def write_csv(self, name: str, columns: Sequence[str], rows) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        with open(path, "w", newline="") as fh:
            for line in self.header():
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
        return path

    def write_report(self) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        text = "\n".join(self.header() + [""] + self.lines) + "\n"
        (self.out / "report.txt").write_text(text)


def resolve_seed(flag: int | None, config_seed: int | None) -> int:
    if flag is not None:
        return flag
    if config_seed is not None:
        return config_seed
    env = os.environ.get("LINDCYCLE_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"LINDCYCLE_SEED must be an integer, got {env!r}") from None
    return 0


# ---------------------------------------------------------------------------
# commands


def cmd_check(run: Run) -> int:
    protocol = run.model.protocol
    profile, windows = cycles.spohn_windows(protocol, run.samples or 257)
    run.say(f"period: {fmt(protocol.period)}")
    if not windows:
        run.say("windows: none")
        run.say("THEOREM2: NOT-SATISFIED")
        return EXIT_NEGATIVE
    for w in windows:
        run.say(f"window: [{fmt(w.start)}, {fmt(w.end)}] Lambda={fmt(w.rate)}")
    best = max(windows, key=lambda w: (w.length, -w.start))
    run.say(f"tau: {fmt(best.length)} (window starting at {fmt(best.start)})")
    run.say(f"Lambda: {fmt(best.rate)}")
    run.say("THEOREM2: SATISFIED")
    return EXIT_OK


def cmd_rates(run: Run) -> int:
    protocol = run.model.protocol
    profile, _ = cycles.spohn_windows(protocol, run.samples or 257)
    run.write_csv("rates.csv", ["t", "lambda"], [(t, lam) for t, lam, _ in profile])
    run.say(f"Lambda (min over [0, {fmt(protocol.period)}]): {fmt(min(lam for _, lam, _ in profile))}")
    if run.horizon is not None:
        cert = cycles.relaxing_certificate(
            protocol, run.horizon, samples=max(run.samples or 0, 2001),
            slices_per_unit=run.slices, seed=run.seed, check_states=False, tail_tol=run.tol["rate"],
        )
        run.say(f"integral over [0, {fmt(run.horizon)}]: {fmt(cert.integral)}")
        if cert.tail_exponent is not None:
            run.say(f"tail exponent: {fmt(cert.tail_exponent)}")
        run.say("relaxing: certified" if cert.relaxing_certified else "relaxing: not certified")
    return EXIT_OK


def _cycle_rows(lc: cycles.LimitCycle, d: int):
    for t, rho in lc.samples:
        row = [t] + [rho[i, i].real for i in range(d)]
        for i in range(d):
            for j in range(i + 1, d):
                row += [rho[i, j].real, rho[i, j].imag]
        yield row


def _cycle_columns(d: int) -> list[str]:
    cols = ["t"] + [f"p{i + 1}" for i in range(d)]
    for i in range(d):
        for j in range(i + 1, d):
            cols += [f"re_rho{i + 1}{j + 1}", f"im_rho{i + 1}{j + 1}"]
    return cols


def _need_periodic(run: Run) -> None:
    if not run.model.protocol.periodic:
        raise UsageError(f"command '{run.command}' needs a periodic protocol")


def cmd_cycle(run: Run) -> int:
    _need_periodic(run)
    protocol = run.model.protocol
    m = monodromy(protocol, run.slices).matrix
    report = cycles.monodromy_spectrum(protocol, matrix=m, unit_tol=run.tol["unit"])
    run.write_csv(
        "spectrum.csv", ["index", "re", "im", "modulus", "phase"],
        [(float(k), mu.real, mu.imag, abs(mu), math.atan2(mu.imag, mu.real))
         for k, mu in enumerate(report.eigenvalues)],
    )
    run.say(f"classification: {report.label}")
    run.say(f"unit_eigenvalue_count: {report.unit_eigenvalue_count}")
    run.say(f"gap: {fmt(report.gap)}")
    if report.classification != cycles.UNIQUE_CYCLE:
        return EXIT_NEGATIVE
    lc = cycles.find_limit_cycle(
        protocol, run.slices, points=run.samples or 65,
        unit_tol=run.tol["unit"], agreement_tol=run.tol["agreement"],
    )
    d = protocol.dim
    run.write_csv("cycle.csv", _cycle_columns(d), _cycle_rows(lc, d))
    run.say(f"periodicity_residual: {fmt(lc.periodicity_residual)}")
    run.say(f"solver_agreement: {fmt(lc.solver_agreement)}")
    return EXIT_OK


def _initial_state(run: Run, d: int, anchor: np.ndarray) -> np.ndarray:
    spec = run.rho0 if run.rho0 is not None else "random"
    if isinstance(spec, np.ndarray):
        if spec.shape != (d, d):
            raise UsageError(f"rho0 has shape {spec.shape}, expected {(d, d)}")
        return spec
    if spec == "mixed":
        return np.eye(d, dtype=complex) / d
    if spec == "random":
        return random_density(d, np.random.default_rng(run.seed))
    if spec == "anchor":
        return anchor
    level = spec["level"]
    if level > d:
        raise UsageError(f"rho0 level {level} exceeds dimension {d}")
    rho = np.zeros((d, d), dtype=complex)
    rho[level - 1, level - 1] = 1.0
    return rho


def cmd_evolve(run: Run) -> int:
    _need_periodic(run)
    protocol = run.model.protocol
    d = protocol.dim
    m = monodromy(protocol, run.slices).matrix
    report = cycles.monodromy_spectrum(protocol, matrix=m, unit_tol=run.tol["unit"])
    unique = report.classification == cycles.UNIQUE_CYCLE
    if unique:
        anchor = cycles.find_limit_cycle(
            protocol, run.slices, unit_tol=run.tol["unit"], agreement_tol=run.tol["agreement"]
        ).anchor
    else:
        # no unique cycle: measure against the orbit reached from the maximally mixed state
        c, _ = cycles.power_iterate(m, d, 1e-12, 500_000)
        anchor = from_coords(c, d)
    if run.periods:
        periods = run.periods
    elif run.horizon:
        periods = max(1, int(round(run.horizon / protocol.period)))
    else:
        periods = 20
    rho0 = _initial_state(run, d, anchor)
    states = cycles.stroboscopic_states(m, rho0, periods)
    dist = [trace_distance(r, anchor) for r in states]
    ent = [relative_entropy(r, anchor) for r in states]
    run.write_csv(
        "evolve.csv", ["t", "trace_distance", "relative_entropy"],
        [(k * protocol.period, dk, "inf" if math.isinf(sk) else sk) for k, (dk, sk) in enumerate(zip(dist, ent))],
    )
    monotone = all(b <= a + run.tol["slack"] for a, b in zip(dist, dist[1:]))
    run.say(f"classification: {report.label}")
    if not unique:
        run.say("reference: power-iteration limit from the maximally mixed state")
    run.say(f"periods: {periods}")
    run.say(f"final_distance: {fmt(dist[-1])}")
    run.say(f"non_increasing: {'yes' if monotone else 'no'}")
    converged = dist[-1] <= run.tol["threshold"]
    run.say(f"below_threshold: {'yes' if converged else 'no'} (threshold {fmt(run.tol['threshold'])})")
    return EXIT_OK if unique and monotone and converged else EXIT_NEGATIVE


def cmd_demo(run: Run, name: str) -> int:
    names = {
        "counterexample": ["counterexample"],
        "repaired": ["repaired"],
        "quasiperiodic": ["quasiperiodic_divergent", "quasiperiodic_convergent"],
    }[name]
    failed = []
    for model_name in names:
        model = builtin_model(model_name)
        run.model = model
        for res in check_expectations(model, run.slices, run.tol["unit"]):
            status = "PASS" if res.passed else "FAIL"
            run.say(f"{status} {model.name}.{res.name}: {res.detail}")
            if not res.passed:
                failed.append(f"{model.name}.{res.name}")
    if failed:
        run.say(f"demo {name}: FAIL ({', '.join(failed)})")
        return EXIT_NEGATIVE
    run.say(f"demo {name}: PASS")
    return EXIT_OK


COMMANDS = {"check": cmd_check, "rates": cmd_rates, "cycle": cmd_cycle, "evolve": cmd_evolve}


# ---------------------------------------------------------------------------
# argument handling


def _tolerance(text: str) -> tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep or key not in TOLERANCE_KEYS:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE with KEY in {', '.join(TOLERANCE_KEYS)}")
    try:
        v = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance {key} is not a number: {value!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"tolerance {key} must be positive")
    return key, v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lindcycle", description="Analyse periodically driven Lindblad dynamics.")
    p.add_argument("command", choices=[*COMMANDS, "demo"])
    p.add_argument("demo_name", nargs="?", choices=DEMOS, help="which reproduction to run (demo only)")
    p.add_argument("--config", help="JSON run config")
    p.add_argument("--model", choices=sorted(BUILTIN_MODELS), help="built-in model, overrides the config's model")
    p.add_argument("--samples", type=_positive_int)
    p.add_argument("--slices", type=_positive_int, help="slices per unit time for modulated segments")
    p.add_argument("--horizon", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory for CSV files and report.txt")
    p.add_argument("--tolerance", type=_tolerance, action="append", default=[], metavar="KEY=VALUE")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    args.tolerance = dict(args.tolerance)
    try:
        cfg = RunConfig()
        if args.config:
            try:
                text = Path(args.config).read_text()
            except OSError as exc:
                raise UsageError(f"cannot read config: {exc}") from None
            cfg = parse_run_config(text)
        if args.command == "demo":
            if not args.demo_name:
                raise UsageError(f"demo needs a name: {', '.join(DEMOS)}")
            run = Run(args, cfg, None)
            code = cmd_demo(run, args.demo_name)
        else:
            if args.demo_name:
                raise UsageError(f"unexpected argument {args.demo_name!r}")
            model = builtin_model(args.model) if args.model else cfg.model
            if model is None:
                raise UsageError("no model: pass --model NAME or a config with a 'model' entry")
            run = Run(args, cfg, model)
            if run.horizon is not None and not run.horizon > 0:
                raise UsageError("--horizon must be positive")
            code = COMMANDS[args.command](run)
        run.write_report()
        return code
    except (ConfigError, UsageError, ProtocolError) as exc:
        print(f"lindcycle: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LindcycleError as exc:
        print(f"lindcycle: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NEGATIVE


if __name__ == "__main__":
    sys.exit(main())
