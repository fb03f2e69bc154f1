"""Builders for the example systems and synthetic protocols used by the tests and CLI."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import ProtocolError
from .lindblad import (
    Const,
    Cos,
    DissipationChannel,
    LindbladGenerator,
    ModulatedGenerator,
    Pow,
    Protocol,
    Segment,
    Sin,
)
from .operators import random_hermitian

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|
SIGMA_PLUS = SIGMA_MINUS.T.copy()

DIVERGENT = "DIVERGENT"
CONVERGENT = "CONVERGENT"


def ketbra(i: int, j: int, d: int) -> np.ndarray:
    """``|i><j|`` with levels labelled 1..d."""
    if not (1 <= i <= d and 1 <= j <= d):
        raise ValueError(f"levels must lie in 1..{d}, got ({i}, {j})")
    m = np.zeros((d, d), dtype=complex)
    m[i - 1, j - 1] = 1.0
    return m


def projector(levels, d: int) -> np.ndarray:
    return sum(ketbra(i, i, d) for i in levels)


@dataclass(frozen=True, eq=False)
class ModelSpec:
    name: str
    protocol: Protocol
    expected: dict[str, Any] | None = None
    params: dict[str, Any] = field(default_factory=dict)


def _positive(**kw):
    for k, v in kw.items():
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise ProtocolError(f"{k} must be a positive number, got {v!r}")


def build_driven_qubit(
    gamma_down: float = 1.0,
    gamma_up: float = 1.0,
    drive_amplitude: float = 1.0,
    drive_period: float = 2 * math.pi,
) -> ModelSpec:
    """Qubit under a rotating drive with always-on decay and excitation.

    ``H_t = (A/2)(cos(2 pi t/T) sigma_x + sin(2 pi t/T) sigma_y)``, channels
    ``sigma_-`` and ``sigma_+``.
    """
    _positive(gamma_down=gamma_down, gamma_up=gamma_up, drive_period=drive_period)
    if not math.isfinite(drive_amplitude):
        raise ProtocolError("drive_amplitude must be finite")
    w = 2 * math.pi / drive_period
    gen = ModulatedGenerator(
        ((SIGMA_X, Cos(drive_amplitude / 2, w)), (SIGMA_Y, Sin(drive_amplitude / 2, w))),
        ((SIGMA_MINUS, Const(gamma_down)), (SIGMA_PLUS, Const(gamma_up))),
    )
    protocol = Protocol((Segment(drive_period, gen),))
    return ModelSpec(
        "driven_qubit",
        protocol,
        {"classification": "UNIQUE_CYCLE", "unit_eigenvalue_count": 1, "theorem2": True},
        dict(gamma_down=gamma_down, gamma_up=gamma_up, drive_amplitude=drive_amplitude, drive_period=drive_period),
    )


def _pair_channels(pairs, gamma: float, up_ratio: float, d: int) -> tuple[DissipationChannel, ...]:
    chans = []
    for a, b in pairs:
        chans.append(DissipationChannel(ketbra(a, b, d), gamma))
        chans.append(DissipationChannel(ketbra(b, a, d), gamma * up_ratio))
    return tuple(chans)


def _swap_generator(step_duration: float) -> LindbladGenerator:
    # resonant pi-pulse between |2> and |3>: a full population swap in one step
    h = math.pi / (2 * step_duration) * (ketbra(2, 3, 4) + ketbra(3, 2, 4))
    return LindbladGenerator(h)


def _counterexample_segments(gamma, step_duration, up_ratio, extra_first=()):
    zero = np.zeros((4, 4), dtype=complex)
    first = _pair_channels([(1, 3), (2, 4)], gamma, up_ratio, 4) + tuple(extra_first)
    third = _pair_channels([(1, 2), (3, 4)], gamma, up_ratio, 4)
    return (
        Segment(step_duration, LindbladGenerator(zero, first)),
        Segment(step_duration, _swap_generator(step_duration)),
        Segment(step_duration, LindbladGenerator(zero, third)),
        Segment(step_duration, _swap_generator(step_duration)),
    )


def build_counterexample(gamma: float = 1.0, step_duration: float = 1.0, up_ratio: float = 1.0) -> ModelSpec:
    """Four-level, four-step cycle whose dissipators never connect all levels at once.

    Steps: thermalize pairs (1,3) and (2,4); swap 2 <-> 3; thermalize pairs
    (1,2) and (3,4); swap 2 <-> 3.  ``up_ratio`` scales the upward rate of each
    pair relative to the downward rate ``gamma``.  The population of levels 1
    and 3 is conserved from period to period.
    """
    _positive(gamma=gamma, step_duration=step_duration, up_ratio=up_ratio)
    protocol = Protocol(_counterexample_segments(gamma, step_duration, up_ratio))
    return ModelSpec(
        "counterexample",
        protocol,
        {
            "classification": "DEGENERATE",
            "unit_eigenvalue_count": 2,
            "conserved": [projector([1, 3], 4)],
            "theorem2": False,
        },
        dict(gamma=gamma, step_duration=step_duration, up_ratio=up_ratio),
    )


def build_repaired_counterexample(
    gamma: float = 1.0, step_duration: float = 1.0, mix_rate: float = 1.0, up_ratio: float = 1.0
) -> ModelSpec:
    """The four-step cycle with an extra (1,2) exchange during the first step.

    The jump operators of step 1 then generate the full matrix algebra, so
    the Spohn conditions hold on ``[0, step_duration]``.
    """
    _positive(gamma=gamma, step_duration=step_duration, mix_rate=mix_rate, up_ratio=up_ratio)
    extra = (DissipationChannel(ketbra(1, 2, 4), mix_rate), DissipationChannel(ketbra(2, 1, 4), mix_rate))
    protocol = Protocol(_counterexample_segments(gamma, step_duration, up_ratio, extra))
    return ModelSpec(
        "repaired",
        protocol,
        {"classification": "UNIQUE_CYCLE", "unit_eigenvalue_count": 1, "theorem2": True},
        dict(gamma=gamma, step_duration=step_duration, mix_rate=mix_rate, up_ratio=up_ratio),
    )


def build_quasiperiodic_qubit(kind: str = DIVERGENT, horizon: float = 60.0) -> ModelSpec:
    """One-shot qubit schedule on ``[0, horizon]`` with ``H_t = cos(t) sx + cos(sqrt(2) t) sz``.

    DIVERGENT keeps both rates at 1; CONVERGENT uses ``(1 + t)**-2``.
    """
    _positive(horizon=horizon)
    if kind == DIVERGENT:
        rate = Const(1.0)
    elif kind == CONVERGENT:
        rate = Pow(1.0, 1.0, -2.0)
    else:
        raise ProtocolError(f"kind must be {DIVERGENT} or {CONVERGENT}, got {kind!r}")
    gen = ModulatedGenerator(
        ((SIGMA_X, Cos(1.0, 1.0)), (SIGMA_Z, Cos(1.0, math.sqrt(2.0)))),
        ((SIGMA_MINUS, rate), (SIGMA_PLUS, rate)),
    )
    protocol = Protocol((Segment(horizon, gen),), periodic=False)
    return ModelSpec(
        f"quasiperiodic_{kind.lower()}",
        protocol,
        {"relaxing": kind == DIVERGENT},
        dict(kind=kind, horizon=horizon),
    )


def build_pi_pulse(duration: float = 1.0) -> ModelSpec:
    """Unitary-only qubit protocol whose period map is conjugation by ``sigma_x``."""
    _positive(duration=duration)
    gen = LindbladGenerator(math.pi / (2 * duration) * SIGMA_X)
    return ModelSpec(
        "pi_pulse",
        Protocol((Segment(duration, gen),)),
        {"classification": "PERIOD_MULTIPLE(2)", "theorem2": False},
        dict(duration=duration),
    )


BUILTIN_MODELS: dict[str, Callable[..., ModelSpec]] = {
    "driven_qubit": build_driven_qubit,
    "counterexample": build_counterexample,
    "repaired": build_repaired_counterexample,
    "quasiperiodic_divergent": lambda **kw: build_quasiperiodic_qubit(DIVERGENT, **kw),
    "quasiperiodic_convergent": lambda **kw: build_quasiperiodic_qubit(CONVERGENT, **kw),
    "pi_pulse": build_pi_pulse,
}


def builtin_model(name: str, **params) -> ModelSpec:
    try:
        builder = BUILTIN_MODELS[name]
    except KeyError:
        raise ProtocolError(f"unknown model {name!r}; choose from {sorted(BUILTIN_MODELS)}") from None
    return builder(**params)


def shipped_models() -> list[ModelSpec]:
    return [builtin_model(name) for name in BUILTIN_MODELS]


def random_protocol(rng: np.random.Generator, d: int | None = None, segments: int | None = None) -> Protocol:
    """Random periodic protocol mixing constant and modulated segments."""
    d = d or int(rng.integers(2, 4))
    n = segments or int(rng.integers(1, 4))
    segs = []
    for _ in range(n):
        duration = float(rng.uniform(0.2, 1.0))
        n_chan = int(rng.integers(0, 3))
        ops = [rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)) for _ in range(n_chan)]
        if rng.random() < 0.5:
            chans = tuple(DissipationChannel(a / np.linalg.norm(a), float(rng.uniform(0.1, 1.0))) for a in ops)
            segs.append(Segment(duration, LindbladGenerator(random_hermitian(d, rng), chans)))
        else:
            w = float(rng.uniform(0.5, 3.0))
            terms = (
                (random_hermitian(d, rng), Const(1.0)),
                (random_hermitian(d, rng), Cos(float(rng.uniform(0.2, 1.0)), w)),
            )
            chans = tuple(
                (a / np.linalg.norm(a), Sin(0.3, w, float(rng.uniform(0, 2 * math.pi)), 0.5)) for a in ops
            )
            segs.append(Segment(duration, ModulatedGenerator(terms, chans, d)))
    return Protocol(tuple(segs))


# ---------------------------------------------------------------------------
# expectations


@dataclass(frozen=True)
class ExpectationResult:
    name: str
    passed: bool
    detail: str


def check_expectations(model: ModelSpec, slices_per_unit: int = 256, unit_tol: float = 1e-6) -> list[ExpectationResult]:
    """Evaluate the expectations embedded in a model."""
    from .cycles import monodromy_spectrum, relaxing_certificate, spohn_windows
    from .operators import to_coords
    from .propagation import monodromy

    results: list[ExpectationResult] = []
    exp = model.expected or {}
    protocol = model.protocol
    matrix = None
    if protocol.periodic and ({"classification", "unit_eigenvalue_count", "conserved"} & exp.keys()):
        matrix = monodromy(protocol, slices_per_unit).matrix
        report = monodromy_spectrum(protocol, matrix=matrix, unit_tol=unit_tol)
        if "classification" in exp:
            ok = report.label == exp["classification"]
            results.append(ExpectationResult("classification", ok, f"{report.label} (expected {exp['classification']})"))
        if "unit_eigenvalue_count" in exp:
            ok = report.unit_eigenvalue_count == exp["unit_eigenvalue_count"]
            results.append(ExpectationResult(
                "unit_eigenvalue_count", ok,
                f"{report.unit_eigenvalue_count} (expected {exp['unit_eigenvalue_count']})",
            ))
    for k, q in enumerate(exp.get("conserved", [])):
        qc = to_coords(q)
        # <Q, M rho> = <M^T Q, rho> for all rho  <=>  M^T q = q
        defect = float(np.max(np.abs(matrix.T @ qc - qc)))
        results.append(ExpectationResult(f"conserved[{k}]", defect <= 1e-8, f"defect {defect:.2e}"))
    if "theorem2" in exp and protocol.periodic:
        _, windows = spohn_windows(protocol)
        ok = bool(windows) == exp["theorem2"]
        results.append(ExpectationResult("theorem2", ok, f"{len(windows)} window(s) (expected {exp['theorem2']})"))
    if "relaxing" in exp:
        cert = relaxing_certificate(protocol, samples=4001, slices_per_unit=slices_per_unit)
        ok = cert.relaxing_certified == exp["relaxing"]
        if ok and cert.relaxing_certified:
            ok = cert.final_distance is not None and cert.final_distance <= 1e-6
        results.append(ExpectationResult(
            "relaxing", ok,
            f"certified={cert.relaxing_certified} integral={cert.integral:.6g} final_distance={cert.final_distance:.2e}",
        ))
    return results
