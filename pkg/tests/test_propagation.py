import math

import numpy as np
import pytest
from scipy import integrate, linalg

from lindcycle.errors import ProtocolError
from lindcycle.lindblad import (
    Const,
    Cos,
    LindbladGenerator,
    ModulatedGenerator,
    Protocol,
    Segment,
    constant_protocol,
    generator_superop,
)
from lindcycle.models import build_driven_qubit, build_pi_pulse, random_protocol
from lindcycle.operators import (
    SuperOp,
    eig_hermitian,
    hs_inner,
    matrix_exp,
    operator_basis,
    random_density,
    random_hermitian,
)
from lindcycle.propagation import (
    Propagator,
    choi_matrix,
    cptp_check,
    decompose_observable,
    evolve,
    heisenberg_propagate,
    monodromy,
    propagate_interval,
    step_exponential,
    timed_factors,
)
from oracles import SM, SP, SX, SZ, liouvillian, random_cptp_choi_kraus, unvec, vec


def dephasing(g=0.8):
    return LindbladGenerator(np.zeros((2, 2)), ((SZ, g),))


# --- slices -----------------------------------------------------------------------


def test_step_exponential_small_dt():
    gen = LindbladGenerator(SX, ((SM, 1.0), (SP, 0.4)))
    assert np.max(np.abs(step_exponential(gen, 1e-12).matrix - np.eye(4))) <= 1e-9
    with pytest.raises(ProtocolError):
        step_exponential(gen, 0.0)


def test_step_exponential_dephasing_multiplier():
    g, dt = 0.8, 0.6
    m = step_exponential(dephasing(g), dt).matrix
    assert m[1, 1] == pytest.approx(math.exp(-2 * g * dt), rel=1e-13)
    assert m[2, 2] == pytest.approx(math.exp(-2 * g * dt), rel=1e-13)
    assert m[3, 3] == pytest.approx(1.0, rel=1e-13)


def test_step_exponential_adjoint_block(rng):
    gen = LindbladGenerator(random_hermitian(2, rng), ((SM, 1.0),))
    m = step_exponential(gen, 0.3, adjoint=True).matrix
    assert m[0, 0] == pytest.approx(1.0, abs=1e-14)
    assert np.max(np.abs(m[1:, 0])) <= 1e-14
    rho = random_density(2, rng)
    out = step_exponential(gen, 0.3).apply(rho)
    assert np.trace(out).real == pytest.approx(1.0, abs=1e-10)


# --- intervals ------------------------------------------------------------------------


def test_constant_protocol_matches_exponential(rng):
    gen = LindbladGenerator(random_hermitian(3, rng), ((rng.normal(size=(3, 3)), 0.7),))
    p = constant_protocol(gen, 2.0)
    prop = propagate_interval(p, 0.0, 1.3)
    ref = matrix_exp(generator_superop(gen).matrix, 1.3)
    assert np.max(np.abs(prop.matrix - ref)) <= 1e-10
    # and the independent vec-form oracle
    k = liouvillian(gen.hamiltonian, [(c.operator, c.rate) for c in gen.channels])
    rho = random_density(3, rng)
    direct = unvec(linalg.expm(k * 1.3) @ vec(rho), 3)
    assert np.max(np.abs(prop.apply(rho) - direct)) <= 1e-10


def test_modulated_protocol_against_ode_oracle():
    model = build_driven_qubit(1.0, 0.5, 2.0, 3.0)
    prop = propagate_interval(model.protocol, 0.0, 3.0, slices_per_unit=512)
    w = 2 * math.pi / 3.0

    def rhs(t, y):
        h = 1.0 * (math.cos(w * t) * SX + math.sin(w * t) * np.array([[0, -1j], [1j, 0]]))
        return liouvillian(h, [(SM, 1.0), (SP, 0.5)]) @ y

    rho = np.array([[0.3, 0.2 - 0.1j], [0.2 + 0.1j, 0.7]])
    sol = integrate.solve_ivp(rhs, (0, 3.0), vec(rho).astype(complex), rtol=1e-12, atol=1e-13)
    ref = unvec(sol.y[:, -1], 2)
    assert np.max(np.abs(prop.apply(rho) - ref)) <= 1e-6


def test_cocycle_and_period_shift():
    # cut points inside a slice cost O(h^3) each, so use a fine grid
    p = random_protocol(np.random.default_rng(3), d=3, segments=3)
    T = p.period
    t0, t1, t2 = 0.1 * T, 0.55 * T, 1.7 * T
    a = propagate_interval(p, t0, t1, 1024).matrix
    b = propagate_interval(p, t1, t2, 1024).matrix
    c = propagate_interval(p, t0, t2, 1024).matrix
    assert np.max(np.abs(b @ a - c)) <= 1e-9
    for t in (0.3 * T, T, 1.4 * T):
        shifted = propagate_interval(p, T, t + T).matrix
        assert np.max(np.abs(shifted - propagate_interval(p, 0.0, t).matrix)) <= 1e-9


def test_composition_at_segment_boundaries_is_exact():
    p = random_protocol(np.random.default_rng(3), d=3, segments=3)
    b = p.boundaries
    parts = [propagate_interval(p, b[k], b[k + 1], 64).matrix for k in range(3)]
    whole = monodromy(p, 64).matrix
    assert np.max(np.abs(parts[2] @ parts[1] @ parts[0] - whole)) <= 1e-13


def test_many_period_interval_uses_powers():
    p = random_protocol(np.random.default_rng(4), d=2, segments=2)
    T = p.period
    one = monodromy(p).matrix
    long = propagate_interval(p, 0.0, 5 * T)
    assert np.max(np.abs(long.matrix - np.linalg.matrix_power(one, 5))) <= 1e-10
    tail = propagate_interval(p, 0.0, 5.25 * T).matrix
    assert np.max(np.abs(tail - propagate_interval(p, 0.0, 0.25 * T).matrix @ np.linalg.matrix_power(one, 5))) <= 1e-10


def test_adjoint_ordering():
    p = random_protocol(np.random.default_rng(5), d=3, segments=3)
    for t0, t1 in ((0.0, p.period), (0.2, 0.9 * p.period), (0.3, 2.6 * p.period)):
        fwd = propagate_interval(p, t0, t1)
        adj = propagate_interval(p, t0, t1, adjoint=True)
        assert np.max(np.abs(fwd.matrix.T - adj.matrix)) <= 1e-10
        assert adj.trace_defect() <= 1e-9
        assert fwd.trace_defect() <= 1e-9


def test_interval_errors():
    p = constant_protocol(dephasing(), 1.0)
    with pytest.raises(ProtocolError):
        propagate_interval(p, 1.0, 0.5)
    with pytest.raises(ProtocolError):
        propagate_interval(p, 0.0, 1.0, slices_per_unit=0)
    sched = Protocol((Segment(1.0, dephasing()),), periodic=False)
    with pytest.raises(ProtocolError):
        propagate_interval(sched, 0.0, 2.0)
    with pytest.raises(ProtocolError):
        monodromy(sched)


def test_slices_respect_segment_boundaries():
    p = random_protocol(np.random.default_rng(6), d=2, segments=3)
    ends = [t for t, _ in timed_factors(p, 0.0, p.period)]
    for b in p.boundaries[1:]:
        assert any(abs(e - b) <= 1e-12 for e in ends)


# --- monodromy ----------------------------------------------------------------------


def test_pi_pulse_monodromy_is_sigma_x_conjugation():
    m = monodromy(build_pi_pulse().protocol).matrix
    basis = operator_basis(2)
    ref = np.array([[np.trace(gi @ SX @ gj @ SX).real for gj in basis] for gi in basis])
    assert np.max(np.abs(m - ref)) <= 1e-12
    assert np.allclose(np.sort(np.linalg.eigvals(m).real), [-1, -1, 1, 1], atol=1e-12)


def test_propagator_contractive(periodic_models, monodromies):
    for m in periodic_models:
        prop = Propagator(SuperOp(monodromies[m.name], m.protocol.dim), 0.0, m.protocol.period, 0)
        assert prop.one_norm_estimate() <= 1 + 1e-8


def test_positivity_along_trajectories(models):
    rng = np.random.default_rng(9)
    for m in models:
        p = m.protocol
        d = p.dim
        span = p.period if not p.periodic else 2 * p.period
        grid = np.linspace(0, span, 9)[1:]
        props = [propagate_interval(p, 0.0, t) for t in grid]
        for _ in range(50):
            rho = random_density(d, rng)
            for prop in props:
                out = prop.apply(rho)
                assert eig_hermitian(out)[0][0] >= -1e-8
                assert abs(np.trace(out).real - 1) <= 1e-9


def test_slice_convergence_is_second_order():
    # midpoint slicing: error(N) - error(2N) shrinks by ~4 per doubling
    p = build_driven_qubit(1.0, 0.5, 3.0, 2.0).protocol
    ns = [64, 128, 256, 512, 1024]
    mats = {n: monodromy(p, n).matrix for n in ns}
    diffs = [np.max(np.abs(mats[n] - mats[2 * n])) for n in ns[:-1]]
    slope = -np.polyfit(np.log(ns[:-1]), np.log(diffs), 1)[0]
    assert 1.8 <= slope <= 2.2


# --- CPTP -----------------------------------------------------------------------------


def test_cptp_identity_and_transpose():
    ident = cptp_check(SuperOp(np.eye(4), 2))
    assert ident.passed and ident.choi_min_eigenvalue == pytest.approx(0, abs=1e-15)
    assert np.allclose(np.sort(np.linalg.eigvalsh(choi_matrix(SuperOp(np.eye(4), 2)))), [0, 0, 0, 2])
    transpose = cptp_check(SuperOp(np.diag([1.0, 1.0, -1.0, 1.0]), 2))
    assert not transpose.passed
    assert transpose.choi_min_eigenvalue == pytest.approx(-1, abs=1e-9)


def test_cptp_random_kraus_channels(rng):
    for d in (2, 3):
        ks = random_cptp_choi_kraus(d, rng)
        basis = operator_basis(d)
        m = np.array([[np.trace(gi @ sum(k @ gj @ k.conj().T for k in ks)).real for gj in basis] for gi in basis])
        rep = cptp_check(SuperOp(m, d))
        assert rep.passed


def test_cptp_rejects_heisenberg_propagator():
    prop = propagate_interval(constant_protocol(dephasing(), 1.0), 0.0, 1.0, adjoint=True)
    with pytest.raises(ProtocolError):
        cptp_check(prop)


# --- observables --------------------------------------------------------------------------


def test_decompose_observable(rng):
    dec = decompose_observable(SZ)
    assert dec.x == 0 and np.allclose(dec.X_prime, SZ)
    dec = decompose_observable(np.eye(3))
    assert dec.x == pytest.approx(1) and np.allclose(dec.X_prime, 0)
    x = random_hermitian(4, rng)
    dec = decompose_observable(x)
    assert np.array_equal(dec.reconstruct(), dec.x * np.eye(4) + dec.X_prime)
    assert np.allclose(dec.reconstruct(), x, atol=1e-15)
    assert abs(np.trace(dec.X_prime)) <= 1e-12


def test_heisenberg_duality_and_unit(rng):
    p = random_protocol(np.random.default_rng(10), d=3, segments=2)
    for t in (0.4, 1.0, 2.3 * p.period):
        assert np.allclose(heisenberg_propagate(p, np.eye(3), t), np.eye(3), atol=1e-10)
        for _ in range(5):
            x0, rho0 = random_hermitian(3, rng), random_density(3, rng)
            lhs = hs_inner(heisenberg_propagate(p, x0, t), rho0)
            assert lhs == pytest.approx(hs_inner(x0, evolve(p, rho0, t)), abs=1e-9)
    with pytest.raises(ProtocolError):
        heisenberg_propagate(p, np.eye(3), -1.0)


def test_heisenberg_unitary_preserves_spectrum(rng):
    p = Protocol((Segment(0.7, LindbladGenerator(random_hermitian(3, rng))),))
    x0 = random_hermitian(3, rng)
    xt = heisenberg_propagate(p, x0, 1.9)
    assert np.allclose(eig_hermitian(xt)[0], eig_hermitian(x0)[0], atol=1e-10)


def test_modulated_segment_in_protocol_evolves_correctly():
    gen = ModulatedGenerator(((SX, Cos(1.0, 2.0)),), ((SM, Const(1.0)), (SP, Const(0.5))))
    p = Protocol((Segment(1.0, gen), Segment(0.5, LindbladGenerator(SZ, ((SM, 0.3),)))))
    rho = evolve(p, np.eye(2) / 2, 1.5)
    assert abs(np.trace(rho) - 1) <= 1e-12
    assert np.allclose(evolve(p, np.eye(2) / 2, 0.0), np.eye(2) / 2)
