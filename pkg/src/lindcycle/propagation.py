"""Propagators by time slicing, the monodromy map, and CPTP checks.

Constant segments are exponentiated exactly.  Modulated segments are cut on
a grid fixed in segment-local time (``ceil(duration * slices_per_unit)``
cells) and each cell, or the part of it inside the requested interval, uses
the generator frozen at its midpoint.  Because the grid is attached to the
segments, propagators over shifted copies of an interval are identical and
composing at grid points is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .errors import ProtocolError
from .lindblad import LindbladGenerator, Protocol, generator_superop
from .operators import (
    SuperOp,
    eig_hermitian,
    from_coords,
    matrix_exp,
    operator_basis,
    superop_one_norm,
)

DEFAULT_SLICES_PER_UNIT = 256


def step_exponential(gen: LindbladGenerator, dt: float, adjoint: bool = False) -> SuperOp:
    """``exp(L dt)``, or its HS adjoint ``exp(L^+ dt)``, as a FULL superoperator."""
    if not dt > 0:
        raise ProtocolError(f"time step must be positive, got {dt!r}")
    m = matrix_exp(generator_superop(gen).matrix, dt)
    return SuperOp(m.T.copy() if adjoint else m, gen.dim)


@dataclass(frozen=True, eq=False)
class Propagator:
    superop: SuperOp
    t_start: float
    t_end: float
    slice_count: int
    adjoint: bool = False

    @property
    def matrix(self) -> np.ndarray:
        return self.superop.matrix

    @property
    def dim(self) -> int:
        return self.superop.dim

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.superop.apply(x)

    __call__ = apply

    def trace_defect(self) -> float:
        """Deviation of the row (Schrodinger) or column (Heisenberg) fixed by trace preservation."""
        m = self.matrix
        e0 = np.zeros(m.shape[0])
        e0[0] = 1.0
        line = m[:, 0] if self.adjoint else m[0, :]
        return float(np.max(np.abs(line - e0)))

    def one_norm_estimate(self, **kwargs) -> float:
        """Lower estimate of the trace-norm operator norm (see ``superop_one_norm``)."""
        return superop_one_norm(self.superop, **kwargs).value


class _Piece(NamedTuple):
    segment: int
    local_start: float
    local_end: float
    offset: float  # absolute time of the segment start


def _pieces(protocol: Protocol, t0: float, t1: float) -> Iterator[_Piece]:
    """Split ``[t0, t1]`` at segment boundaries (periodically extended when periodic)."""
    T = protocol.period
    starts = protocol.boundaries[:-1]
    if protocol.periodic:
        p = math.floor(t0 / T)
    else:
        if t0 < -1e-12 * T or t1 > T * (1 + 1e-12):
            raise ProtocolError(f"interval [{t0}, {t1}] exceeds schedule horizon {T}")
        p = 0
    eps = 1e-13 * max(1.0, T)
    while p * T < t1 - eps:
        for k, seg in enumerate(protocol.segments):
            a = p * T + starts[k]
            lo, hi = max(t0, a), min(t1, a + seg.duration)
            if hi - lo > eps:
                yield _Piece(k, min(max(lo - a, 0.0), seg.duration), min(max(hi - a, 0.0), seg.duration), a)
        if not protocol.periodic:
            break
        p += 1


def _piece_factors(
    protocol: Protocol, piece: _Piece, slices_per_unit: int, max_step: float | None = None
) -> list[tuple[float, np.ndarray]]:
    seg = protocol.segments[piece.segment]
    if seg.constant:
        length = piece.local_end - piece.local_start
        parts = 1 if max_step is None else max(1, math.ceil(length / max_step - 1e-9))
        step = matrix_exp(generator_superop(seg.generator).matrix, length / parts)
        return [
            (piece.offset + piece.local_start + length * (i + 1) / parts, step) for i in range(parts)
        ]
    n = max(1, math.ceil(seg.duration * slices_per_unit - 1e-9))
    h = seg.duration / n
    k_lo = min(int(math.floor(piece.local_start / h + 1e-9)), n - 1)
    k_hi = max(int(math.ceil(piece.local_end / h - 1e-9)), k_lo + 1)
    factors = []
    for k in range(k_lo, k_hi):
        a = max(piece.local_start, k * h)
        b = min(piece.local_end, (k + 1) * h)
        if b - a <= 1e-15 * seg.duration:
            continue
        factors.append((piece.offset + b, matrix_exp(seg.generator.superop_matrix_at(0.5 * (a + b)), b - a)))
    return factors


def timed_factors(
    protocol: Protocol,
    t0: float,
    t1: float,
    slices_per_unit: int = DEFAULT_SLICES_PER_UNIT,
    max_step: float | None = None,
) -> list[tuple[float, np.ndarray]]:
    """Chronological slice exponentials over ``[t0, t1]``, each tagged with its end time.

    ``max_step`` additionally cuts constant segments into equal exact
    sub-steps, which is only useful when intermediate states are wanted.
    """
    factors: list[tuple[float, np.ndarray]] = []
    for piece in _pieces(protocol, t0, t1):
        factors += _piece_factors(protocol, piece, slices_per_unit, max_step)
    return factors


def _ordered_factors(protocol: Protocol, t0: float, t1: float, slices_per_unit: int) -> list[np.ndarray]:
    return [f for _, f in timed_factors(protocol, t0, t1, slices_per_unit)]


def propagate_interval(
    protocol: Protocol,
    t0: float,
    t1: float,
    slices_per_unit: int = DEFAULT_SLICES_PER_UNIT,
    adjoint: bool = False,
) -> Propagator:
    """Ordered product of slice exponentials from ``t0`` to ``t1``.

    Schrodinger picture: ``E_n ... E_2 E_1``.  Heisenberg picture: the adjoint
    factors in the opposite order, ``E_1^+ E_2^+ ... E_n^+``.  Intervals longer
    than one period reuse the one-period map through matrix powers.
    """
    if not t1 > t0:
        raise ProtocolError(f"need t0 < t1, got [{t0}, {t1}]")
    if slices_per_unit < 1:
        raise ProtocolError("slices_per_unit must be a positive integer")
    d = protocol.dim
    T = protocol.period
    n_periods = 0
    if protocol.periodic and t1 - t0 > T:
        n_periods = int(math.floor((t1 - t0) / T + 1e-12))
        if (t1 - t0) - n_periods * T <= 1e-12 * T:
            n_periods -= 1
    head_end = t0 + T if n_periods else t1
    factors = _ordered_factors(protocol, t0, head_end, slices_per_unit)
    if adjoint:
        m = np.eye(d * d)
        for f in factors:
            m = m @ f.T
    else:
        m = np.eye(d * d)
        for f in factors:
            m = f @ m
    count = len(factors)
    if n_periods:
        # t0 -> t0+T repeated, then the remaining tail from t0 + n*T to t1
        start_tail = t0 + n_periods * T
        tail = _ordered_factors(protocol, start_tail, t1, slices_per_unit) if t1 - start_tail > 1e-13 * T else []
        power = np.linalg.matrix_power(m, n_periods)
        tm = np.eye(d * d)
        for f in tail:
            tm = tm @ f.T if adjoint else f @ tm
        m = power @ tm if adjoint else tm @ power
        count = count * n_periods + len(tail)
    return Propagator(SuperOp(m, d), t0, t1, count, adjoint)


def monodromy(protocol: Protocol, slices_per_unit: int = DEFAULT_SLICES_PER_UNIT, adjoint: bool = False) -> Propagator:
    """Full-period propagator ``V(T, 0)`` (or its adjoint)."""
    if not protocol.periodic:
        raise ProtocolError("monodromy is only defined for periodic protocols")
    return propagate_interval(protocol, 0.0, protocol.period, slices_per_unit, adjoint)


def evolve(protocol: Protocol, rho0: np.ndarray, t: float, slices_per_unit: int = DEFAULT_SLICES_PER_UNIT) -> np.ndarray:
    """Schrodinger-picture state at time ``t`` starting from ``rho0`` at 0."""
    if t == 0:
        return np.array(rho0, dtype=complex)
    return propagate_interval(protocol, 0.0, t, slices_per_unit).apply(rho0)


def heisenberg_propagate(
    protocol: Protocol, x0: np.ndarray, t: float, slices_per_unit: int = DEFAULT_SLICES_PER_UNIT
) -> np.ndarray:
    """Observable ``X_t = V(t, 0)^+ X_0``."""
    if t < 0:
        raise ProtocolError("Heisenberg propagation needs t >= 0")
    if t == 0:
        return np.array(x0, dtype=complex)
    return propagate_interval(protocol, 0.0, t, slices_per_unit, adjoint=True).apply(x0)


# ---------------------------------------------------------------------------
# observable decomposition


class ObservableDecomposition(NamedTuple):
    x: float
    X_prime: np.ndarray

    def reconstruct(self) -> np.ndarray:
        d = self.X_prime.shape[0]
        return self.x * np.eye(d) + self.X_prime


def decompose_observable(x: np.ndarray) -> ObservableDecomposition:
    """Split ``X = x * I + X'`` with ``X'`` traceless."""
    x = np.asarray(x, dtype=complex)
    d = x.shape[0]
    scalar = float(np.trace(x).real / d)
    return ObservableDecomposition(scalar, x - scalar * np.eye(d))


# ---------------------------------------------------------------------------
# complete positivity


class CPTPReport(NamedTuple):
    trace_defect: float
    choi_min_eigenvalue: float
    passed: bool


def choi_matrix(op: SuperOp) -> np.ndarray:
    """``sum_ij |i><j| (x) V(|i><j|)`` with the map extended complex-linearly."""
    d = op.dim
    basis = operator_basis(d)
    blocks = np.zeros((d, d, d, d), dtype=complex)
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1.0
            c = np.einsum("kab,ba->k", basis, e)
            blocks[i, j] = from_coords(op.matrix @ c, d)
    choi = blocks.transpose(0, 2, 1, 3).reshape(d * d, d * d)
    return (choi + choi.conj().T) / 2


def cptp_check(prop: Propagator | SuperOp, trace_tol: float = 1e-9, choi_tol: float = 1e-8) -> CPTPReport:
    """Trace defect over basis inputs and the smallest Choi eigenvalue of a Schrodinger map."""
    if isinstance(prop, Propagator):
        if prop.adjoint:
            raise ProtocolError("cptp_check expects a Schrodinger-picture propagator")
        op = prop.superop
    else:
        op = prop
    d = op.dim
    basis = operator_basis(d)
    traces_in = np.array([np.trace(g).real for g in basis])
    traces_out = math.sqrt(d) * op.matrix[0, :]
    defect = float(np.max(np.abs(traces_out - traces_in)))
    choi_min = float(eig_hermitian(choi_matrix(op))[0][0])
    return CPTPReport(defect, choi_min, defect <= trace_tol and choi_min >= -choi_tol)
