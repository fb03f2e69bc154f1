"""Long-time behaviour of periodically driven GKSL dynamics.

Monodromy spectrum and classification, the limit cycle, the contraction
bound for traceless observables, relative-entropy monotonicity along
trajectories, and the integrated-rate relaxation certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateFixedSpaceError, NonConvergentError, ProtocolError, WindowError
from .lindblad import Protocol, analyze_span, lambda_at, min_rate_over_window
from .operators import (
    Domain,
    eig_hermitian,
    from_coords,
    random_density,
    random_traceless,
    relative_entropy,
    subspace_inf_norm,
    to_coords,
    trace_distance,
)
from .propagation import DEFAULT_SLICES_PER_UNIT, monodromy, propagate_interval, timed_factors

UNIT_TOL = 1e-6
MAX_ROOT_ORDER = 12
ENTROPY_SLACK = 1e-9
ENTROPY_FLOOR = 1e-12

UNIQUE_CYCLE = "UNIQUE_CYCLE"
DEGENERATE = "DEGENERATE"
PERIOD_MULTIPLE = "PERIOD_MULTIPLE"
UNDETERMINED = "UNDETERMINED"


# ---------------------------------------------------------------------------
# spectrum


@dataclass(frozen=True, eq=False)
class SpectralReport:
    eigenvalues: np.ndarray  # sorted by decreasing modulus
    unit_eigenvalue_count: int
    peripheral_count: int
    gap: float
    classification: str
    period_multiple: int | None = None

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.eigenvalues)

    @property
    def phases(self) -> np.ndarray:
        return np.angle(self.eigenvalues)

    @property
    def second_modulus(self) -> float:
        return float(self.moduli[1]) if len(self.eigenvalues) > 1 else 0.0

    @property
    def label(self) -> str:
        if self.classification == PERIOD_MULTIPLE:
            return f"{PERIOD_MULTIPLE}({self.period_multiple})"
        return self.classification


def classify_spectrum(eigenvalues: np.ndarray, unit_tol: float = UNIT_TOL) -> SpectralReport:
    """Classify the long-time behaviour from the eigenvalues of a one-period map.

    A peripheral eigenvalue other than 1 that sits on an ``n``-th root of unity
    (``n <= 12``) means the response repeats every ``n`` periods; this takes
    precedence over a degenerate eigenvalue 1.
    """
    ev = np.asarray(eigenvalues, dtype=complex)
    ev = ev[np.argsort(-np.abs(ev), kind="stable")]
    unit = int(np.sum(np.abs(ev - 1) < unit_tol))
    peripheral = ev[np.abs(ev) > 1 - unit_tol]
    nontrivial = peripheral[np.abs(peripheral - 1) >= unit_tol]
    gap = float(1 - np.abs(ev[1])) if len(ev) > 1 else 1.0
    if len(nontrivial):
        for n in range(2, MAX_ROOT_ORDER + 1):
            roots = np.exp(2j * np.pi * np.arange(n) / n)
            if all(np.min(np.abs(mu - roots)) < unit_tol for mu in peripheral):
                return SpectralReport(ev, unit, len(peripheral), gap, PERIOD_MULTIPLE, n)
        return SpectralReport(ev, unit, len(peripheral), gap, UNDETERMINED)
    if unit >= 2:
        return SpectralReport(ev, unit, len(peripheral), gap, DEGENERATE)
    if unit == 1:
        return SpectralReport(ev, unit, len(peripheral), gap, UNIQUE_CYCLE)
    return SpectralReport(ev, unit, len(peripheral), gap, UNDETERMINED)


def monodromy_eigenvalues(matrix: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.eigvals(matrix)
    except np.linalg.LinAlgError as exc:
        raise NonConvergentError(f"QR iteration failed on the monodromy matrix: {exc}") from exc


def monodromy_spectrum(
    protocol: Protocol,
    slices_per_unit: int = DEFAULT_SLICES_PER_UNIT,
    unit_tol: float = UNIT_TOL,
    matrix: np.ndarray | None = None,
) -> SpectralReport:
    """Eigenvalues of the Schrodinger monodromy map and the resulting classification."""
    if matrix is None:
        matrix = monodromy(protocol, slices_per_unit).matrix
    return classify_spectrum(monodromy_eigenvalues(matrix), unit_tol)


# ---------------------------------------------------------------------------
# limit cycle


@dataclass(frozen=True, eq=False)
class LimitCycle:
    anchor: np.ndarray
    samples: list[tuple[float, np.ndarray]]
    periodicity_residual: float
    solver_agreement: float
    power_iterations: int
    clipped: bool = False

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.samples])


def power_iterate(m: np.ndarray, d: int, tol: float, max_iter: int) -> tuple[np.ndarray, int]:
    r = np.zeros(m.shape[0])
    r[0] = 1 / math.sqrt(d)
    # sqrt(d) * ||dc||_2 bounds the trace norm of the step
    for k in range(1, max_iter + 1):
        nxt = m @ r
        if math.sqrt(d) * np.linalg.norm(nxt - r) <= tol:
            return nxt, k
        r = nxt
    raise NonConvergentError(f"power iteration did not settle in {max_iter} periods (gap ~ 0?)")


def fixed_point_coords(m: np.ndarray, d: int) -> np.ndarray:
    """Solve ``(I - M') x = M(I/d)'`` on the traceless block; returns full coordinates."""
    block = m[1:, 1:]
    rhs = m[1:, 0] / math.sqrt(d)
    x = np.linalg.solve(np.eye(block.shape[0]) - block, rhs)
    return np.concatenate([[1 / math.sqrt(d)], x])


def find_limit_cycle(
    protocol: Protocol,
    slices_per_unit: int = DEFAULT_SLICES_PER_UNIT,
    points: int = 65,
    unit_tol: float = UNIT_TOL,
    agreement_tol: float = 1e-8,
    max_iter: int = 500_000,
) -> LimitCycle:
    """Periodic orbit of the dynamics, assuming a unique fixed point of the monodromy map.

    The anchor comes from a linear solve on the traceless block and is
    cross-checked by iterating the monodromy map from the maximally mixed
    state.  The orbit is then sampled at ``points`` times by replaying the
    very slice factors the monodromy was built from.
    """
    d = protocol.dim
    factors = timed_factors(
        protocol, 0.0, protocol.period, slices_per_unit, max_step=protocol.period / max(points - 1, 1)
    )
    m = np.eye(d * d)
    for _, f in factors:
        m = f @ m
    report = monodromy_spectrum(protocol, matrix=m, unit_tol=unit_tol)
    if report.unit_eigenvalue_count != 1:
        raise DegenerateFixedSpaceError(report.unit_eigenvalue_count)

    direct = fixed_point_coords(m, d)
    iterated, n_iter = power_iterate(m, d, 1e-12, max_iter)
    agreement = trace_distance(from_coords(direct, d), from_coords(iterated, d))
    if agreement > agreement_tol:
        raise NonConvergentError(f"linear solve and power iteration disagree by {agreement:.3e}")

    anchor = from_coords(direct, d)
    anchor = (anchor + anchor.conj().T) / 2
    w, v = eig_hermitian(anchor)
    clipped = False
    if w[0] < 0:
        if w[0] < -1e-9:
            raise NonConvergentError(f"fixed point is not positive (eigenvalue {w[0]:.3e})")
        w = np.clip(w, 0.0, None)
        anchor = (v * (w / w.sum())) @ v.conj().T
        clipped = True

    keep = set(np.rint(np.linspace(0, len(factors), max(points, 2))).astype(int).tolist())
    samples = [(0.0, anchor)]
    c = to_coords(anchor)
    for i, (t, f) in enumerate(factors, start=1):
        c = f @ c
        if i in keep:
            samples.append((float(t), from_coords(c, d)))
    residual = trace_distance(samples[-1][1], anchor)
    return LimitCycle(anchor, samples, residual, agreement, n_iter, clipped)


def stroboscopic_states(matrix: np.ndarray, rho0: np.ndarray, periods: int) -> list[np.ndarray]:
    """``[rho0, M rho0, ..., M^periods rho0]`` from a monodromy matrix."""
    d = rho0.shape[0]
    c = to_coords(rho0)
    out = [from_coords(c, d)]
    for _ in range(periods):
        c = matrix @ c
        out.append(from_coords(c, d))
    return out


# ---------------------------------------------------------------------------
# contraction of traceless observables


@dataclass(frozen=True)
class ContractionReport:
    max_ratio: float
    bound: float
    rate: float
    tau: float
    passed: bool
    nonexpansive: bool
    ratios: tuple[float, ...] = field(repr=False, default=())


def contraction_check(
    protocol: Protocol,
    tau: float,
    n_samples: int = 100,
    slices_per_unit: int = DEFAULT_SLICES_PER_UNIT,
    rate_samples: int = 65,
    seed: int | None = 0,
    observables: list[np.ndarray] | None = None,
    slack: float = 1e-9,
) -> ContractionReport:
    """Compare one-period shrinkage of ``||X'||`` (traceless infinity norm) with ``exp(-Lambda tau)``.

    ``Lambda`` is the minimum rate over ``[0, tau]``; ``tau = 0`` gives the
    trivial bound 1.
    """
    d = protocol.dim
    if tau > 0:
        rate = min_rate_over_window(protocol, 0.0, tau, rate_samples)
        if not rate > 0:
            raise WindowError(f"rate vanishes on [0, {tau}]; window does not satisfy the Spohn conditions")
    else:
        rate = 0.0
    bound = math.exp(-rate * tau)
    heis = monodromy(protocol, slices_per_unit).matrix.T
    rng = np.random.default_rng(seed)
    if observables is None:
        observables = [random_traceless(d, rng) for _ in range(n_samples)]
    ratios = []
    for x in observables:
        c = to_coords(x)
        c[0] = 0.0
        before = subspace_inf_norm(from_coords(c, d), Domain.TRACELESS)
        if before == 0:
            ratios.append(0.0)
            continue
        after_c = heis @ c
        after_c[0] = 0.0
        ratios.append(subspace_inf_norm(from_coords(after_c, d), Domain.TRACELESS) / before)
    worst = max(ratios) if ratios else 0.0
    return ContractionReport(
        worst, bound, rate, tau, worst <= bound + slack, worst <= 1 + slack, tuple(ratios)
    )


# ---------------------------------------------------------------------------
# relative entropy


@dataclass(frozen=True)
class EntropyTrace:
    times: np.ndarray
    values: np.ndarray
    regularized: bool

    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def non_increasing(self, slack: float = ENTROPY_SLACK) -> bool:
        return bool(np.all(self.increments() <= slack))

    def __iter__(self):
        return iter(zip(self.times.tolist(), self.values.tolist()))


def _regularize(rho: np.ndarray) -> tuple[np.ndarray, bool]:
    w = eig_hermitian(rho)[0]
    if w[0] >= ENTROPY_FLOOR:
        return rho, False
    d = rho.shape[0]
    return (1 - ENTROPY_FLOOR) * rho + ENTROPY_FLOOR * np.eye(d) / d, True


def _step_maps(protocol: Protocol, t_grid: np.ndarray, slices_per_unit: int) -> list[np.ndarray]:
    return [
        propagate_interval(protocol, float(a), float(b), slices_per_unit).matrix
        for a, b in zip(t_grid[:-1], t_grid[1:])
    ]


def entropy_monotonicity_trace(
    protocol: Protocol,
    rho0: np.ndarray,
    sigma0: np.ndarray,
    horizon_periods: int = 10,
    points_per_period: int = 8,
    slices_per_unit: int = DEFAULT_SLICES_PER_UNIT,
) -> EntropyTrace:
    """Co-evolve two states and record ``S(rho_t || sigma_t)`` on a uniform grid.

    States with an eigenvalue below ``1e-12`` are mixed with ``1e-12 * I/d``
    before the logarithm is taken; ``regularized`` reports whether that
    happened.  Non-periodic schedules are traced over their single horizon.
    """
    return entropy_monotonicity_traces(
        protocol, [(rho0, sigma0)], horizon_periods, points_per_period, slices_per_unit
    )[0]


def entropy_monotonicity_traces(
    protocol: Protocol,
    pairs: Sequence[tuple[np.ndarray, np.ndarray]],
    horizon_periods: int = 10,
    points_per_period: int = 8,
    slices_per_unit: int = DEFAULT_SLICES_PER_UNIT,
) -> list[EntropyTrace]:
    """Several ``(rho0, sigma0)`` pairs sharing one set of step maps."""
    for rho0, sigma0 in pairs:
        if not math.isfinite(relative_entropy(rho0, sigma0)):
            raise ValueError("initial relative entropy is infinite")
    T = protocol.period
    if not protocol.periodic:
        horizon_periods = 1
    h = T / points_per_period
    one_period = _step_maps(protocol, np.linspace(0.0, T, points_per_period + 1), slices_per_unit)
    d = protocol.dim
    times = np.array([0.0] + [k * T + (j + 1) * h for k in range(horizon_periods) for j in range(points_per_period)])
    traces = []
    for rho0, sigma0 in pairs:
        r, s = to_coords(rho0), to_coords(sigma0)
        values = []
        regularized = False

        def record(rc, sc):
            nonlocal regularized
            a, ra = _regularize(from_coords(rc, d))
            b, rb = _regularize(from_coords(sc, d))
            regularized = regularized or ra or rb
            values.append(relative_entropy(a, b))

        record(r, s)
        for _ in range(horizon_periods):
            for step in one_period:
                r, s = step @ r, step @ s
                record(r, s)
        traces.append(EntropyTrace(times, np.array(values), regularized))
    return traces


def lag_period_entropy(
    protocol: Protocol,
    rho0: np.ndarray,
    periods: int = 50,
    slices_per_unit: int = DEFAULT_SLICES_PER_UNIT,
) -> EntropyTrace:
    """Stroboscopic sequence ``S(rho_{kT} || rho_{(k+1)T})`` for ``k = 0..periods``."""
    m = monodromy(protocol, slices_per_unit).matrix
    states = stroboscopic_states(m, np.asarray(rho0, dtype=complex), periods + 1)
    regularized = False
    values = []
    for a, b in zip(states[:-1], states[1:]):
        a, ra = _regularize(a)
        b, rb = _regularize(b)
        regularized = regularized or ra or rb
        values.append(relative_entropy(a, b))
    times = protocol.period * np.arange(periods + 1)
    return EntropyTrace(times, np.array(values), regularized)


# ---------------------------------------------------------------------------
# integrated-rate certificate

DIVERGENT = "DIVERGENT"
PERIODIC_DIVERGENCE_TOL = 1e-12
TAIL_RATE_TOL = 1e-9
TAIL_EXPONENT_LIMIT = 1.0


@dataclass(frozen=True, eq=False)
class RateCertificate:
    lambda_profile: list[tuple[float, float]]
    integral: float
    divergent: bool
    relaxing_certified: bool
    tail_exponent: float | None = None
    final_distance: float | None = None

    @property
    def integral_estimate(self) -> float | str:
        return DIVERGENT if self.divergent else self.integral


def _tail_exponent(t: np.ndarray, lam: np.ndarray, horizon: float) -> tuple[float, float]:
    """Mean rate over the last half, and a power-law exponent from the last two quarters."""
    def window_mean(a, b):
        sel = (t >= a - 1e-12) & (t <= b + 1e-12)
        if sel.sum() < 2:
            return float(np.interp(0.5 * (a + b), t, lam))
        return float(np.trapezoid(lam[sel], t[sel]) / (t[sel][-1] - t[sel][0]))

    tail = window_mean(0.5 * horizon, horizon)
    q3 = window_mean(0.5 * horizon, 0.75 * horizon)
    q4 = window_mean(0.75 * horizon, horizon)
    if q4 <= 0 or q3 <= 0:
        return tail, math.inf
    return tail, math.log(q3 / q4) / math.log(7 / 5)


def relaxing_certificate(
    protocol: Protocol,
    horizon: float | None = None,
    samples: int = 2001,
    slices_per_unit: int = DEFAULT_SLICES_PER_UNIT,
    seed: int | None = 0,
    check_states: bool = True,
    tail_tol: float = TAIL_RATE_TOL,
) -> RateCertificate:
    """Integrate the rate ``lambda_t`` over ``[0, horizon]`` and decide divergence.

    Periodic protocols diverge iff the per-period integral exceeds ``1e-12``.
    For a one-shot schedule the integral is declared divergent when the mean
    rate over the last half of the horizon exceeds ``tail_tol`` *and* the
    decay exponent fitted between the last two quarters, assuming
    ``lambda ~ t**-p``, is below 1 (a non-integrable tail).
    """
    horizon = protocol.period if horizon is None else float(horizon)
    if not horizon > 0:
        raise ProtocolError("horizon must be positive")
    if not protocol.periodic and horizon > protocol.period * (1 + 1e-12):
        raise ProtocolError(f"horizon {horizon} exceeds schedule length {protocol.period}")
    t = np.linspace(0.0, horizon, int(samples))
    lam = np.array([lambda_at(protocol.generator_at(float(x))) for x in t])
    integral = float(np.trapezoid(lam, t))
    exponent = None
    if protocol.periodic:
        T = protocol.period
        n = max(int(math.ceil(samples * T / horizon)), 65)
        tp = np.linspace(0.0, T, n)
        per_period = float(np.trapezoid([lambda_at(protocol.generator_at(float(x))) for x in tp], tp))
        divergent = per_period > PERIODIC_DIVERGENCE_TOL
    else:
        tail, exponent = _tail_exponent(t, lam, horizon)
        divergent = tail > tail_tol and exponent < TAIL_EXPONENT_LIMIT

    distance = None
    if check_states:
        rng = np.random.default_rng(seed)
        d = protocol.dim
        prop = propagate_interval(protocol, 0.0, horizon, slices_per_unit)
        a = prop.apply(random_density(d, rng))
        b = prop.apply(random_density(d, rng))
        distance = trace_distance(a, b)
    return RateCertificate(list(zip(t.tolist(), lam.tolist())), integral, divergent, divergent, exponent, distance)


# ---------------------------------------------------------------------------
# windows where the Spohn conditions hold


@dataclass(frozen=True)
class ConditionWindow:
    start: float
    end: float
    rate: float

    @property
    def length(self) -> float:
        return self.end - self.start


def spohn_windows(protocol: Protocol, samples: int = 257) -> tuple[list[tuple[float, float, bool]], list[ConditionWindow]]:
    """Sample rate and Spohn verdict over one period, segment by segment.

    Each segment is sampled on its own closed interval (the right end is the
    limit from inside the segment), with roughly ``samples`` points per
    period in total.  Runs of samples where both conditions hold become
    windows; windows never cross segment boundaries.
    """
    profile: list[tuple[float, float, bool]] = []
    windows: list[ConditionWindow] = []
    starts = protocol.boundaries[:-1]
    for start, seg in zip(starts, protocol.segments):
        n = max(2, int(round(samples * seg.duration / protocol.period)))
        local = np.linspace(0.0, seg.duration, n)
        run: list[tuple[float, float]] = []
        for x in local:
            gen = seg.at(float(x))
            lam = lambda_at(gen)
            ok = bool(lam > 0 and analyze_span(gen).spohn)
            profile.append((start + float(x), lam, ok))
            if ok:
                run.append((start + float(x), lam))
            if (not ok or x == local[-1]) and len(run) >= 2:
                windows.append(ConditionWindow(run[0][0], run[-1][0], min(r for _, r in run)))
            if not ok:
                run = []
    return profile, windows
