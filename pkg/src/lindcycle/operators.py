"""Dense algebra on the real space of Hermitian operators.

Operators are plain ``numpy`` arrays of shape ``(d, d)``.  Superoperators are
stored as real ``(d**2, d**2)`` matrices of coefficients in a fixed
HS-orthonormal Hermitian basis whose first element is ``1/sqrt(d)``; see
:func:`operator_basis`.  Everything here is a pure function of its inputs.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np
from scipy import optimize

from .errors import (
    DimensionError,
    EigenNonConvergenceError,
    ExponentRangeError,
    InvalidOperatorError,
)

HERMITIAN_ATOL = 1e-12
DENSITY_ATOL = 1e-10
JACOBI_REL_THRESHOLD = 1e-14
JACOBI_MAX_SWEEPS = 100
EXP_MAX_NORM = 1e4


class Domain(enum.Enum):
    """Which subspace of the operator space a norm or superoperator refers to."""

    FULL = "full"
    TRACELESS = "traceless"


# ---------------------------------------------------------------------------
# validation


def check_hermitian(x, atol: float = HERMITIAN_ATOL) -> np.ndarray:
    """Return ``x`` as a complex array after checking it is a Hermitian operator, d >= 2."""
    x = np.asarray(x, dtype=complex)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise InvalidOperatorError(f"expected a square matrix, got shape {x.shape}")
    if x.shape[0] < 2:
        raise InvalidOperatorError("Hilbert-space dimension must be at least 2")
    if not np.all(np.isfinite(x)):
        raise InvalidOperatorError("operator has non-finite entries")
    defect = np.max(np.abs(x - x.conj().T))
    if defect > atol:
        raise InvalidOperatorError(f"operator is not Hermitian (max defect {defect:.3e})")
    return x


def check_density(rho, atol: float = DENSITY_ATOL) -> np.ndarray:
    """Return ``rho`` after checking unit trace and positivity within ``atol``."""
    rho = check_hermitian(rho)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > atol:
        raise InvalidOperatorError(f"density matrix has trace {tr!r}")
    lo = eig_hermitian(rho)[0][0]
    if lo < -atol:
        raise InvalidOperatorError(f"density matrix has negative eigenvalue {lo:.3e}")
    return rho


def _same_dim(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape != y.shape:
        raise DimensionError(f"dimension mismatch: {x.shape} vs {y.shape}")


# ---------------------------------------------------------------------------
# basis and coordinates


@lru_cache(maxsize=None)
def _basis(d: int) -> np.ndarray:
    elements = [np.eye(d, dtype=complex) / math.sqrt(d)]
    for j in range(d):
        for k in range(j + 1, d):
            sym = np.zeros((d, d), dtype=complex)
            sym[j, k] = sym[k, j] = 1 / math.sqrt(2)
            asym = np.zeros((d, d), dtype=complex)
            asym[j, k] = -1j / math.sqrt(2)
            asym[k, j] = 1j / math.sqrt(2)
            elements += [sym, asym]
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1.0
        diag[l] = -l
        elements.append(np.diag(diag / math.sqrt(l * (l + 1))).astype(complex))
    basis = np.array(elements)
    basis.setflags(write=False)
    return basis


def operator_basis(d: int) -> np.ndarray:
    """Generalized Gell-Mann basis of the Hermitian operators, shape ``(d**2, d, d)``.

    Element 0 is ``I/sqrt(d)``.  For ``d = 2`` the order is
    ``(I, sigma_x, sigma_y, sigma_z) / sqrt(2)``.
    """
    if d < 2:
        raise InvalidOperatorError("Hilbert-space dimension must be at least 2")
    return _basis(int(d))


def to_coords(x: np.ndarray) -> np.ndarray:
    """Real coordinates of a Hermitian operator in :func:`operator_basis`.

    Non-Hermitian input yields complex coordinates (complex-linear extension).
    """
    x = np.asarray(x, dtype=complex)
    coords = np.einsum("kab,ba->k", operator_basis(x.shape[0]), x)
    if np.max(np.abs(coords.imag), initial=0.0) <= 1e-13 * max(1.0, np.max(np.abs(coords))):
        return coords.real.copy()
    return coords


def from_coords(c: np.ndarray, d: int | None = None) -> np.ndarray:
    c = np.asarray(c)
    if d is None:
        d = math.isqrt(c.shape[0])
    return np.einsum("k,kab->ab", c, operator_basis(d))


@dataclass(frozen=True, eq=False)
class SuperOp:
    """Real matrix of a linear map on the Hermitian operators.

    With ``domain=FULL`` the matrix is ``d**2 x d**2``; with ``TRACELESS`` it is
    the ``(d**2 - 1)``-square block acting on traceless operators.
    """

    matrix: np.ndarray
    dim: int
    domain: Domain = Domain.FULL

    def __post_init__(self):
        n = self.dim**2 - (self.domain is Domain.TRACELESS)
        if self.matrix.shape != (n, n):
            raise DimensionError(f"superoperator matrix must be {n}x{n}, got {self.matrix.shape}")

    def apply(self, x: np.ndarray) -> np.ndarray:
        c = to_coords(x)
        if self.domain is Domain.TRACELESS:
            return from_coords(np.concatenate([[0.0], self.matrix @ c[1:]]), self.dim)
        return from_coords(self.matrix @ c, self.dim)

    __call__ = apply

    def adjoint(self) -> "SuperOp":
        # orthonormal real basis: the HS adjoint is the transpose
        return SuperOp(self.matrix.T.copy(), self.dim, self.domain)

    def restricted(self) -> "SuperOp":
        """Compression onto the traceless subspace (project output, drop identity input)."""
        if self.domain is Domain.TRACELESS:
            return self
        return SuperOp(self.matrix[1:, 1:].copy(), self.dim, Domain.TRACELESS)

    def __matmul__(self, other: "SuperOp") -> "SuperOp":
        if self.dim != other.dim or self.domain is not other.domain:
            raise DimensionError("cannot compose superoperators on different spaces")
        return SuperOp(self.matrix @ other.matrix, self.dim, self.domain)


def superop_from_map(f: Callable[[np.ndarray], np.ndarray], d: int) -> SuperOp:
    """Matrix ``M[i, j] = <G_i, f(G_j)>`` of a Hermiticity-preserving map ``f``."""
    basis = operator_basis(d)
    cols = [to_coords(f(g)) for g in basis]
    m = np.array(cols).T
    return SuperOp(np.real(m).astype(float), d)


def apply_to_matrix(op: SuperOp, x: np.ndarray) -> np.ndarray:
    """Apply a FULL superoperator to an arbitrary (possibly non-Hermitian) matrix."""
    return from_coords(op.matrix @ to_coords(x), op.dim)


# ---------------------------------------------------------------------------
# scalar functionals


def hs_inner(x: np.ndarray, y: np.ndarray) -> float:
    """Hilbert-Schmidt product ``tr(XY)`` of two Hermitian operators."""
    x = np.asarray(x)
    y = np.asarray(y)
    _same_dim(x, y)
    return float(np.einsum("ab,ba->", x, y).real)


def eig_hermitian(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Returns ascending eigenvalues and a unitary matrix whose columns are the
    matching eigenvectors.  Works for real symmetric input as well (the
    rotations then stay real).  Raises :class:`EigenNonConvergenceError` if the
    off-diagonal mass has not dropped below ``1e-14 * ||X||_F`` after 100
    sweeps.
    """
    a = np.array(x, dtype=complex if np.iscomplexobj(x) else float)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise InvalidOperatorError(f"expected a square matrix, got shape {a.shape}")
    v = np.eye(n, dtype=a.dtype)
    thresh = JACOBI_REL_THRESHOLD * np.linalg.norm(a)
    for _ in range(JACOBI_MAX_SWEEPS):
        off = np.abs(a - np.diag(np.diag(a)))
        if np.sqrt(np.sum(off**2)) <= thresh:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= thresh / n:
                    continue
                phase = apq / mag
                app, aqq = a[p, p].real, a[q, q].real
                theta = (aqq - app) / (2.0 * mag)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # J = diag(1, conj(phase)) @ [[c, s], [-s, c]]
                j = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]], dtype=a.dtype)
                idx = [p, q]
                a[:, idx] = a[:, idx] @ j
                a[idx, :] = j.conj().T @ a[idx, :]
                a[p, q] = a[q, p] = 0.0
                v[:, idx] = v[:, idx] @ j
    else:
        raise EigenNonConvergenceError(f"Jacobi iteration did not converge in {JACOBI_MAX_SWEEPS} sweeps")
    w = np.diag(a).real.copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def eigvalsh(x: np.ndarray) -> np.ndarray:
    return eig_hermitian(x)[0]


def trace_norm(x: np.ndarray) -> float:
    """Sum of absolute eigenvalues."""
    return float(np.sum(np.abs(eigvalsh(x))))


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """``||rho - sigma||_1`` (no factor 1/2)."""
    return trace_norm(np.asarray(rho) - np.asarray(sigma))


def subspace_inf_norm(x: np.ndarray, domain: Domain = Domain.FULL) -> float:
    """Dual norm of the trace norm, optionally restricted to traceless operators.

    FULL gives the spectral norm.  TRACELESS gives ``(lambda_max - lambda_min)/2``,
    the value of ``max |tr(YX)|`` over traceless ``Y`` with ``||Y||_1 = 1``.
    """
    x = np.asarray(x)
    w = eigvalsh(x)
    if domain is Domain.FULL:
        return float(max(abs(w[0]), abs(w[-1])))
    tr = np.trace(x).real
    if abs(tr) > 1e-10:
        raise InvalidOperatorError(f"TRACELESS norm requested for operator with trace {tr:.3e}")
    return float(0.5 * (w[-1] - w[0]))


def relative_entropy(rho: np.ndarray, sigma: np.ndarray) -> float:
    """``tr rho (log rho - log sigma)``, or ``inf`` if supp(rho) is not inside supp(sigma)."""
    rho = np.asarray(rho)
    sigma = np.asarray(sigma)
    _same_dim(rho, sigma)
    p = eigvalsh(rho)
    q, vq = eig_hermitian(sigma)
    weights = np.einsum("aj,ab,bj->j", vq.conj(), rho, vq).real
    if np.any((q < 1e-12) & (weights > 1e-10)):
        return math.inf
    pos = p > 0
    s = float(np.sum(p[pos] * np.log(p[pos])))
    keep = q >= 1e-12
    s -= float(np.sum(weights[keep] * np.log(q[keep])))
    return max(s, 0.0) if s > -1e-10 else s


def _one_norm(a: np.ndarray) -> float:
    return float(np.abs(a).sum(axis=0).max())


def matrix_exp(m: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """``exp(scale * M)`` by scaling and squaring of a truncated Taylor series.

    The argument is halved until its 1-norm is at most 0.5, the series is
    summed until a term falls below ``1e-16`` of the partial sum, and the
    result is squared back.  Arguments with 1-norm above ``1e4`` are refused.
    """
    a = np.asarray(m) * scale
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix_exp argument has non-finite entries")
    norm = _one_norm(a)
    if norm > EXP_MAX_NORM:
        raise ExponentRangeError(f"||scale*M||_1 = {norm:.3e} exceeds {EXP_MAX_NORM:g}")
    squarings = max(0, math.ceil(math.log2(norm / 0.5))) if norm > 0.5 else 0
    a = a / 2.0**squarings
    n = a.shape[0]
    result = np.eye(n, dtype=a.dtype)
    term = np.eye(n, dtype=a.dtype)
    for k in range(1, 60):
        term = term @ a / k
        result = result + term
        if _one_norm(term) <= 1e-16 * _one_norm(result):
            break
    for _ in range(squarings):
        result = result @ result
    return result


# ---------------------------------------------------------------------------
# induced trace norm of a superoperator


class NormEstimate(NamedTuple):
    value: float
    argmax: np.ndarray
    estimate: bool = True


def _extreme_point(z: np.ndarray, d: int, domain: Domain) -> np.ndarray:
    u = z[:d] + 1j * z[d : 2 * d]
    u = u / np.linalg.norm(u)
    if domain is Domain.FULL:
        return np.outer(u, u.conj())
    v = z[2 * d : 3 * d] + 1j * z[3 * d :]
    v = v - u * np.vdot(u, v)
    v = v / np.linalg.norm(v)
    return 0.5 * (np.outer(u, u.conj()) - np.outer(v, v.conj()))


def superop_one_norm(
    op: SuperOp,
    starts: int = 200,
    refine: int = 5,
    rng: np.random.Generator | int | None = 0,
) -> NormEstimate:
    """Estimate the trace-norm-induced operator norm of ``op``.

    The maximum of a convex function over the trace-norm unit ball sits at an
    extreme point: ``+-|u><u|`` on the full space, ``(|u><u| - |v><v|)/2``
    with ``u`` orthogonal to ``v`` on the traceless subspace.  We sample
    ``starts`` random extreme points and polish the best ``refine`` of them
    with Nelder-Mead.  The result is a lower bound on the true norm.
    """
    rng = np.random.default_rng(rng)
    d = op.dim
    domain = op.domain
    npar = 2 * d if domain is Domain.FULL else 4 * d

    def gain(z):
        y = _extreme_point(z, d, domain)
        out = op.apply(y)
        if domain is Domain.FULL:
            return trace_norm(out)
        return trace_norm(out - np.trace(out) / d * np.eye(d))

    zs = rng.standard_normal((starts, npar))
    vals = np.array([gain(z) for z in zs])
    best_val = float(vals.max())
    best_z = zs[int(vals.argmax())]
    for i in np.argsort(vals)[::-1][:refine]:
        res = optimize.minimize(
            lambda z: -gain(z), zs[i], method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 4000},
        )
        if -res.fun > best_val:
            best_val, best_z = float(-res.fun), res.x
    return NormEstimate(best_val, _extreme_point(best_z, d, domain))


# ---------------------------------------------------------------------------
# random sampling helpers (used by tests and the analysis routines)


def random_hermitian(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * (g + g.conj().T) / 2


def random_traceless(d: int, rng: np.random.Generator) -> np.ndarray:
    x = random_hermitian(d, rng)
    return x - np.trace(x).real / d * np.eye(d)


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random mixed state from the Ginibre ensemble."""
    g = rng.standard_normal((d, rank or d)) + 1j * rng.standard_normal((d, rank or d))
    rho = g @ g.conj().T
    rho = rho / np.trace(rho).real
    return (rho + rho.conj().T) / 2
