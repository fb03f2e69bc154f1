"""GKSL generators, periodic protocols, and the Spohn-condition analysis.

The generator acting on a state is::

    L rho = -i [H, rho] + sum_mu gamma_mu (A rho A^+ - 1/2 {A^+ A, rho})

with hbar = 1.  :func:`analyze_span` rewrites the dissipator in an
HS-orthonormal Hermitian basis ``F`` of the span of the jump operators, which
gives the coefficient matrix ``B`` and its smallest eigenvalue ``b``; the
isotropic part ``(b/2) sum_a D[F_a]`` is :func:`diagonal_part`, and the
negative of its largest eigenvalue on traceless operators is the rate
returned by :func:`lambda_at`.
"""

from __future__ import annotations

import bisect
import math
import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import DimensionError, ProtocolError, WindowError
from .operators import (
    SuperOp,
    check_hermitian,
    eig_hermitian,
    operator_basis,
    to_coords,
)

RANK_TOL = 1e-10


# ---------------------------------------------------------------------------
# generators


@dataclass(frozen=True, eq=False)
class DissipationChannel:
    operator: np.ndarray
    rate: float

    def __post_init__(self):
        op = np.asarray(self.operator, dtype=complex)
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise ProtocolError(f"jump operator must be square, got shape {op.shape}")
        if not np.all(np.isfinite(op)) or np.linalg.norm(op) == 0:
            raise ProtocolError("jump operator must be finite and nonzero")
        if not (math.isfinite(self.rate) and self.rate > 0):
            raise ProtocolError(f"channel rate must be positive, got {self.rate!r}")
        object.__setattr__(self, "operator", op)
        object.__setattr__(self, "rate", float(self.rate))


@dataclass(frozen=True, eq=False)
class LindbladGenerator:
    """Instantaneous generator: Hamiltonian plus a (possibly empty) list of channels."""

    hamiltonian: np.ndarray
    channels: tuple[DissipationChannel, ...] = ()

    def __post_init__(self):
        h = check_hermitian(self.hamiltonian, atol=1e-10)
        chans = tuple(
            c if isinstance(c, DissipationChannel) else DissipationChannel(*c) for c in self.channels
        )
        for c in chans:
            if c.operator.shape != h.shape:
                raise DimensionError(
                    f"channel operator shape {c.operator.shape} does not match Hamiltonian {h.shape}"
                )
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "channels", chans)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    def scaled_rates(self, factor: float) -> "LindbladGenerator":
        return LindbladGenerator(
            self.hamiltonian,
            tuple(DissipationChannel(c.operator, c.rate * factor) for c in self.channels),
        )


def apply_generator(gen: LindbladGenerator, rho: np.ndarray) -> np.ndarray:
    """Evaluate the GKSL right-hand side on ``rho`` (a single operator or a stack)."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape[-2:] != gen.hamiltonian.shape:
        raise DimensionError(f"state shape {rho.shape} does not match generator dim {gen.dim}")
    h = gen.hamiltonian
    out = -1j * (h @ rho - rho @ h)
    for ch in gen.channels:
        a = ch.operator
        ad = a.conj().T
        ada = ad @ a
        out = out + ch.rate * (a @ rho @ ad - 0.5 * (ada @ rho + rho @ ada))
    return out


def _superop_matrix(fn, d: int) -> np.ndarray:
    basis = operator_basis(d)
    images = fn(basis)
    # M[i, j] = tr(G_i L(G_j))
    return np.einsum("iab,jba->ij", basis, images).real


def generator_superop(gen: LindbladGenerator, adjoint: bool = False) -> SuperOp:
    """Real matrix of the generator (or its HS adjoint) in the Gell-Mann basis."""
    m = _superop_matrix(lambda g: apply_generator(gen, g), gen.dim)
    return SuperOp(m.T.copy() if adjoint else m, gen.dim)


to_superop = generator_superop


# ---------------------------------------------------------------------------
# time dependence


@dataclass(frozen=True)
class Const:
    value: float

    def __call__(self, t):
        return self.value + 0.0 * np.asarray(t, dtype=float)

    def to_dict(self):
        return {"kind": "const", "value": self.value}


@dataclass(frozen=True)
class Poly:
    """``sum_k coeffs[k] * t**k``, degree at most 4."""

    coeffs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if not 1 <= len(self.coeffs) <= 5:
            raise ProtocolError("polynomial coefficients must have degree 0..4")

    def __call__(self, t):
        return np.polynomial.polynomial.polyval(np.asarray(t, dtype=float), self.coeffs)

    def to_dict(self):
        return {"kind": "poly", "coeffs": list(self.coeffs)}


@dataclass(frozen=True)
class Sin:
    """``offset + amplitude * sin(frequency * t + phase)``."""

    amplitude: float = 1.0
    frequency: float = 1.0
    phase: float = 0.0
    offset: float = 0.0

    def __call__(self, t):
        return self.offset + self.amplitude * np.sin(self.frequency * np.asarray(t, dtype=float) + self.phase)

    def to_dict(self):
        return {"kind": "sin", "amplitude": self.amplitude, "frequency": self.frequency,
                "phase": self.phase, "offset": self.offset}


@dataclass(frozen=True)
class Cos(Sin):
    """``offset + amplitude * cos(frequency * t + phase)``."""

    def __call__(self, t):
        return self.offset + self.amplitude * np.cos(self.frequency * np.asarray(t, dtype=float) + self.phase)

    def to_dict(self):
        return {**super().to_dict(), "kind": "cos"}


@dataclass(frozen=True)
class Pow:
    """``scale * (t + shift) ** exponent`` for ``t + shift > 0``; slowly decaying rates."""

    scale: float = 1.0
    shift: float = 1.0
    exponent: float = -1.0

    def __call__(self, t):
        return self.scale * (np.asarray(t, dtype=float) + self.shift) ** self.exponent

    def to_dict(self):
        return {"kind": "pow", "scale": self.scale, "shift": self.shift, "exponent": self.exponent}


Coefficient = Union[Const, Poly, Sin, Cos, Pow]

_COEFFICIENT_KINDS = {"const": Const, "poly": Poly, "sin": Sin, "cos": Cos, "pow": Pow}


def coefficient_from_dict(spec: dict) -> Coefficient:
    spec = dict(spec)
    kind = spec.pop("kind")
    try:
        cls = _COEFFICIENT_KINDS[kind]
    except KeyError:
        raise ProtocolError(f"unknown coefficient kind {kind!r}") from None
    if cls is Poly:
        return Poly(tuple(spec["coeffs"]))
    return cls(**spec)


@dataclass(frozen=True, eq=False)
class ModulatedGenerator:
    """Generator whose Hamiltonian is ``sum_k f_k(t) H_k`` and whose rates are ``g_mu(t)``.

    ``t`` is segment-local time.  Jump operators themselves are fixed.
    """

    hamiltonian_terms: tuple[tuple[np.ndarray, Coefficient], ...]
    channels: tuple[tuple[np.ndarray, Coefficient], ...] = ()
    dim: int = field(default=0)

    def __post_init__(self):
        terms = tuple((check_hermitian(h, atol=1e-10), f) for h, f in self.hamiltonian_terms)
        chans = tuple((np.asarray(a, dtype=complex), g) for a, g in self.channels)
        dims = {h.shape[0] for h, _ in terms} | {a.shape[0] for a, _ in chans}
        if self.dim:
            dims.add(self.dim)
        if len(dims) != 1:
            raise DimensionError(f"inconsistent dimensions in modulated generator: {sorted(dims)}")
        object.__setattr__(self, "hamiltonian_terms", terms)
        object.__setattr__(self, "channels", chans)
        object.__setattr__(self, "dim", dims.pop())

    def at(self, t: float) -> LindbladGenerator:
        d = self.dim
        h = np.zeros((d, d), dtype=complex)
        for hk, f in self.hamiltonian_terms:
            h = h + float(f(t)) * hk
        chans = []
        for a, g in self.channels:
            rate = float(g(t))
            if not rate > 0:
                raise ProtocolError(f"modulated rate is {rate!r} at local time {t!r}; rates must stay positive")
            chans.append(DissipationChannel(a, rate))
        return LindbladGenerator(h, tuple(chans))

    def _term_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        cached = self.__dict__.get("_terms")
        if cached is None:
            d = self.dim
            zero = np.zeros((d, d), dtype=complex)
            hams = [generator_superop(LindbladGenerator(h)).matrix for h, _ in self.hamiltonian_terms]
            dissip = [
                generator_superop(LindbladGenerator(zero, (DissipationChannel(a, 1.0),))).matrix
                for a, _ in self.channels
            ]
            cached = (np.array(hams).reshape(-1, d * d, d * d), np.array(dissip).reshape(-1, d * d, d * d))
            object.__setattr__(self, "_terms", cached)
        return cached

    def superop_matrix_at(self, t: float) -> np.ndarray:
        """Generator matrix at local time ``t`` as a linear combination of cached term matrices."""
        hams, dissip = self._term_matrices()
        fh = np.array([float(f(t)) for _, f in self.hamiltonian_terms])
        gd = np.array([float(g(t)) for _, g in self.channels])
        if gd.size and not np.all(gd > 0):
            raise ProtocolError(f"modulated rate is {gd.min()!r} at local time {t!r}; rates must stay positive")
        return np.tensordot(fh, hams, axes=1) + np.tensordot(gd, dissip, axes=1)


GeneratorSpec = Union[LindbladGenerator, ModulatedGenerator]


@dataclass(frozen=True, eq=False)
class Segment:
    duration: float
    generator: GeneratorSpec

    def __post_init__(self):
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise ProtocolError(f"segment duration must be positive, got {self.duration!r}")
        if not isinstance(self.generator, (LindbladGenerator, ModulatedGenerator)):
            raise ProtocolError("segment generator must be a LindbladGenerator or ModulatedGenerator")

    @property
    def constant(self) -> bool:
        return isinstance(self.generator, LindbladGenerator)

    def at(self, t_local: float) -> LindbladGenerator:
        if self.constant:
            return self.generator
        return self.generator.at(t_local)


_RATE_CHECK_POINTS = 1025


@dataclass(frozen=True, eq=False)
class Protocol:
    """Piecewise generator over one period ``T`` (or, if not periodic, over ``[0, T]``)."""

    segments: tuple[Segment, ...]
    period: float | None = None
    periodic: bool = True

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ProtocolError("protocol needs at least one segment")
        total = math.fsum(s.duration for s in segs)
        if self.period is None:
            object.__setattr__(self, "period", total)
        elif abs(total - self.period) > 1e-12 * self.period:
            raise ProtocolError(f"segment durations sum to {total!r}, not the period {self.period!r}")
        dims = {s.generator.dim for s in segs}
        if len(dims) != 1:
            raise DimensionError(f"segments have different dimensions {sorted(dims)}")
        for k, s in enumerate(segs):
            if s.constant:
                continue
            grid = np.linspace(0.0, s.duration, _RATE_CHECK_POINTS)
            for _, g in s.generator.channels:
                lo = float(np.min(g(grid)))
                if not lo > 0:
                    raise ProtocolError(f"segment {k}: modulated rate reaches {lo!r}; rates must stay positive")
        object.__setattr__(self, "segments", segs)
        starts = np.concatenate([[0.0], np.cumsum([s.duration for s in segs])[:-1]])
        object.__setattr__(self, "_starts", tuple(float(x) for x in starts))

    @property
    def dim(self) -> int:
        return self.segments[0].generator.dim

    @property
    def boundaries(self) -> list[float]:
        """Segment start times followed by the period."""
        return list(self._starts) + [self.period]

    def locate(self, t: float) -> tuple[int, float]:
        """Segment index and segment-local time for absolute time ``t``."""
        if self.periodic:
            t = t - math.floor(t / self.period) * self.period
            if t >= self.period:
                t = 0.0
        elif not (-1e-12 * self.period <= t <= self.period * (1 + 1e-12)):
            raise ProtocolError(f"time {t!r} outside schedule horizon [0, {self.period!r}]")
        k = bisect.bisect_right(self._starts, t) - 1
        k = min(max(k, 0), len(self.segments) - 1)
        return k, min(max(t - self._starts[k], 0.0), self.segments[k].duration)

    def generator_at(self, t: float) -> LindbladGenerator:
        k, local = self.locate(t)
        return self.segments[k].at(local)


def constant_protocol(gen: LindbladGenerator, period: float = 1.0) -> Protocol:
    return Protocol((Segment(period, gen),))


# ---------------------------------------------------------------------------
# span analysis


@dataclass(frozen=True, eq=False)
class SpanAnalysis:
    span_dim: int
    F_basis: tuple[np.ndarray, ...]
    coeffs: np.ndarray
    B: np.ndarray
    b: float
    self_adjoint: bool
    commutant_dim: int | None
    irreducible: bool | None

    @property
    def spohn(self) -> bool:
        """Both conditions of Spohn's theorem hold."""
        return bool(self.self_adjoint and self.irreducible)


def _rank(s: np.ndarray, tol: float) -> int:
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def _hermitian_gram_schmidt(candidates: list[np.ndarray], tol: float) -> list[np.ndarray]:
    """HS-orthonormalize Hermitian candidates in order, dropping dependent ones."""
    coords = [to_coords(c) for c in candidates]
    scale = max((np.linalg.norm(c) for c in coords), default=0.0)
    kept: list[np.ndarray] = []
    for c in coords:
        v = np.array(c, dtype=float)
        for _ in range(2):
            for q in kept:
                v = v - (q @ v) * q
        nv = np.linalg.norm(v)
        if nv > tol * scale:
            kept.append(v / nv)
    return kept


def _commutant_dim_hermitian(fs: list[np.ndarray], d: int, tol: float) -> int:
    basis = operator_basis(d)
    if not fs:
        return d * d
    blocks = []
    for f in fs:
        images = 1j * (f @ basis - basis @ f)
        blocks.append(np.einsum("iab,jba->ij", basis, images).real)
    s = np.linalg.svd(np.vstack(blocks), compute_uv=False)
    return d * d - _rank(s, tol)


def _commutant_dim_complex(ops: list[np.ndarray], d: int, tol: float) -> int:
    eye = np.eye(d)
    k = np.vstack([np.kron(a, eye) - np.kron(eye, a.T) for a in ops])
    s = np.linalg.svd(k, compute_uv=False)
    return d * d - _rank(s, tol)


def analyze_span(gen: LindbladGenerator, rank_tol: float = RANK_TOL, commutant: bool = True) -> SpanAnalysis:
    """Spohn-condition analysis of the span of the jump operators.

    Self-adjointness is decided by projecting each ``A^+`` onto the span of the
    ``A``.  When the span is self-adjoint, ``F`` is obtained by Gram-Schmidt on
    the Hermitian and anti-Hermitian parts of the channels in order, and the
    commutant is the kernel of ``Y -> (i[F_1, Y], ..., i[F_m, Y])`` on Hermitian
    ``Y``.  For a non-self-adjoint span the commutant is computed over all
    complex matrices commuting with every ``A``.  ``commutant=False`` skips
    that step (``commutant_dim`` and ``irreducible`` are then ``None``).
    """
    d = gen.dim
    ops = [c.operator for c in gen.channels]
    rates = np.array([c.rate for c in gen.channels])
    empty = np.zeros((len(ops), 0), dtype=complex)
    if not ops:
        return SpanAnalysis(0, (), empty, np.zeros((0, 0), dtype=complex), 0.0, True,
                            d * d if commutant else None, False if commutant else None)

    vecs = np.array([a.reshape(-1) for a in ops]).T
    u, s, _ = np.linalg.svd(vecs, full_matrices=False)
    r = _rank(s, rank_tol)
    u = u[:, :r]
    self_adjoint = True
    for a in ops:
        ad = a.conj().T.reshape(-1)
        resid = np.linalg.norm(ad - u @ (u.conj().T @ ad))
        if resid > rank_tol * np.linalg.norm(ad):
            self_adjoint = False
            break

    if not self_adjoint:
        cdim = _commutant_dim_complex(ops, d, rank_tol) if commutant else None
        return SpanAnalysis(r, (), empty, np.zeros((0, 0), dtype=complex), 0.0, False,
                            cdim, (cdim == 1) if commutant else None)

    candidates = []
    for a in ops:
        candidates += [(a + a.conj().T) / 2, (a - a.conj().T) / 2j]
    fcoords = _hermitian_gram_schmidt(candidates, rank_tol)
    basis = operator_basis(d)
    fs = [np.einsum("k,kab->ab", c, basis) for c in fcoords]
    fs = [(f + f.conj().T) / 2 for f in fs]
    # c[mu, alpha] = <F_alpha, A_mu>
    c = np.array([[np.trace(f @ a) for f in fs] for a in ops])
    bmat = c.T @ np.diag(rates) @ c.conj()
    bmat = (bmat + bmat.conj().T) / 2
    b = float(eig_hermitian(bmat)[0][0])
    cdim = _commutant_dim_hermitian(fs, d, rank_tol) if commutant else None
    return SpanAnalysis(len(fs), tuple(fs), c, bmat, b, True, cdim, (cdim == 1) if commutant else None)


def diagonal_part(gen: LindbladGenerator, analysis: SpanAnalysis | None = None) -> SuperOp:
    """Isotropic dissipator ``(b/2) sum_a (F rho F - 1/2 {F F, rho})`` as a symmetric matrix."""
    if analysis is None:
        analysis = analyze_span(gen, commutant=False)
    if not analysis.self_adjoint or not analysis.b > 0:
        raise WindowError("diagonal part needs a self-adjoint span with b > 0")
    fs = np.array(analysis.F_basis)
    half_b = analysis.b / 2

    def ld(g):
        out = np.zeros_like(g)
        for f in fs:
            ff = f @ f
            out = out + half_b * (f @ g @ f - 0.5 * (ff @ g + g @ ff))
        return out

    m = _superop_matrix(ld, gen.dim)
    return SuperOp(m, gen.dim)


def lambda_at(gen: LindbladGenerator, rank_tol: float = RANK_TOL) -> float:
    """Dissipative rate: minus the largest eigenvalue of the diagonal part on traceless operators.

    Zero when the span is not self-adjoint, when there are no channels, or
    when the span is reducible.
    """
    return _rate(gen, analyze_span(gen, rank_tol=rank_tol, commutant=False), rank_tol)


def _rate(gen: LindbladGenerator, analysis: SpanAnalysis, rank_tol: float = RANK_TOL) -> float:
    if not analysis.self_adjoint or analysis.span_dim == 0 or not analysis.b > 0:
        return 0.0
    block = diagonal_part(gen, analysis).matrix[1:, 1:]
    w = eig_hermitian((block + block.T) / 2)[0]
    lam = -float(w[-1])
    scale = max(abs(w[0]), abs(w[-1]))
    if lam <= rank_tol * scale:
        return 0.0
    return lam


def sample_grid(t0: float, t1: float, samples: int) -> np.ndarray:
    return np.linspace(t0, t1, int(samples))


def min_rate_over_window(protocol: Protocol, t0: float, t1: float, samples: int = 65) -> float:
    """Minimum of :func:`lambda_at` on a uniform closed grid over ``[t0, t1]``."""
    if not (t0 < t1) or samples < 2:
        raise WindowError(f"need t0 < t1 and samples >= 2, got [{t0}, {t1}] with {samples}")
    if protocol.periodic and (t0 < 0 or t1 > protocol.period * (1 + 1e-12)):
        raise WindowError(f"window [{t0}, {t1}] not inside [0, {protocol.period}]")
    rates = []
    dims = set()
    # each segment is sampled on its own closed piece of the window so that a
    # boundary point never picks up the neighbouring segment's generator
    eps = 1e-12 * max(1.0, protocol.period)
    for k, seg in enumerate(protocol.segments):
        a = max(t0, protocol._starts[k])
        b = min(t1, protocol._starts[k] + seg.duration)
        if b - a <= eps:
            continue
        n = max(2, int(round(samples * (b - a) / (t1 - t0))))
        for t in sample_grid(a, b, n):
            gen = seg.at(float(t) - protocol._starts[k])
            analysis = analyze_span(gen, commutant=False)
            rates.append(_rate(gen, analysis))
            dims.add(analysis.span_dim)
    if len(dims) > 1:
        warnings.warn(f"span dimension changes across window [{t0}, {t1}]: {sorted(dims)}", stacklevel=2)
    return float(min(rates))
