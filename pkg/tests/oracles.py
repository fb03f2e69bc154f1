"""Independent reference computations for the test suite.

Nothing here imports lindcycle: superoperators are built in the
column-stacking vec representation and exponentiated with scipy.
"""

from __future__ import annotations

import numpy as np
from scipy import linalg, optimize

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
SM = np.array([[0, 1], [0, 0]], dtype=complex)
SP = SM.T.copy()


def vec(x: np.ndarray) -> np.ndarray:
    return np.asarray(x).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int) -> np.ndarray:
    return np.asarray(v).reshape(d, d, order="F")


def liouvillian(h: np.ndarray, channels) -> np.ndarray:
    """vec(L rho) = K vec(rho) with column stacking: vec(AXB) = (B^T kron A) vec(X)."""
    d = h.shape[0]
    eye = np.eye(d)
    k = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for a, g in channels:
        ada = a.conj().T @ a
        k = k + g * (np.kron(a.conj(), a) - 0.5 * np.kron(eye, ada) - 0.5 * np.kron(ada.T, eye))
    return k


def evolve_vec(k: np.ndarray, rho: np.ndarray, t: float) -> np.ndarray:
    d = rho.shape[0]
    return unvec(linalg.expm(k * t) @ vec(rho), d)


def pauli_basis() -> list[np.ndarray]:
    return [m / np.sqrt(2) for m in (I2, SX, SY, SZ)]


def real_matrix(k: np.ndarray, basis: list[np.ndarray]) -> np.ndarray:
    """M_ij = tr(G_i L(G_j)) from a vec-form superoperator."""
    d = basis[0].shape[0]
    return np.array([[np.trace(gi @ unvec(k @ vec(gj), d)).real for gj in basis] for gi in basis])


def traceless_norm_bruteforce(x: np.ndarray, restarts: int = 50, rng=None) -> float:
    """max |tr(Y X)| / ||Y||_1 over traceless Hermitian Y, by multistart gradient ascent.

    Y is parametrized by free real coordinates and the trace norm is smoothed,
    with the smoothing driven to zero over a few BFGS rounds.  No knowledge of
    the extreme points of the unit ball is used.
    """
    rng = np.random.default_rng(rng)
    x = np.asarray(x, dtype=complex)
    d = x.shape[0]
    # orthonormal real coordinates on traceless Hermitian matrices
    basis = []
    for i in range(d):
        for j in range(i + 1, d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = e[j, i] = 1 / np.sqrt(2)
            basis.append(e)
            e = np.zeros((d, d), dtype=complex)
            e[i, j], e[j, i] = -1j / np.sqrt(2), 1j / np.sqrt(2)
            basis.append(e)
    for k in range(1, d):
        e = np.zeros((d, d), dtype=complex)
        e[np.arange(k), np.arange(k)] = 1.0
        e[k, k] = -k
        basis.append(e / np.sqrt(k * (k + 1)))
    basis = np.array(basis)
    xc = np.einsum("kab,ba->k", basis, x).real

    def neg_ratio(z, eps):
        # trace norm smoothed as sum sqrt(w^2 + eps^2); eps -> 0 recovers it
        y = np.einsum("k,kab->ab", z, basis)
        w, u = np.linalg.eigh(y)
        s = np.sqrt(w**2 + eps**2)
        tn = s.sum()
        lin = float(z @ xc)
        sgn = np.sign(lin) or 1.0
        g_tn = np.einsum("kab,ba->k", basis, (u * (w / s)) @ u.conj().T).real
        grad = sgn * (xc * tn - lin * g_tn) / tn**2
        return -sgn * lin / tn, -grad

    def exact(z):
        y = np.einsum("k,kab->ab", z, basis)
        return abs(float(z @ xc)) / np.abs(np.linalg.eigvalsh(y)).sum()

    best = 0.0
    for _ in range(restarts):
        z = rng.standard_normal(len(basis))
        for eps in (1e-2, 1e-6):
            z = z / np.linalg.norm(z)
            z = optimize.minimize(neg_ratio, z, args=(eps,), jac=True, method="BFGS",
                                  options={"gtol": 1e-9, "maxiter": 200}).x
        best = max(best, exact(z))
    return best


def random_cptp_choi_kraus(d: int, rng, n_kraus: int = 3) -> list[np.ndarray]:
    """Kraus operators of a random channel (isometry from a Ginibre stack)."""
    g = rng.standard_normal((n_kraus * d, d)) + 1j * rng.standard_normal((n_kraus * d, d))
    q, _ = np.linalg.qr(g)
    return [q[k * d : (k + 1) * d, :] for k in range(n_kraus)]
