import numpy as np
import pytest

from spinpair.baths import CorrelationProfile, Lorentzian, OhmicLorentzDrude, make_profile
from spinpair.core import (SystemParams, basis_ket, bell_psi_minus, density_from_pure,
                           random_density)
from spinpair.oracle import (R_ORDER, OracleError, Trajectory, exchange_hamiltonian, from_R,
                             generator_parts, integrate_me, integrate_populations,
                             lambda_matrix, max_deviation, me_rhs, step_bound, to_R)
from spinpair.propagator import Propagator, u2_1, u2_2, u4


def bath_off():
    return CorrelationProfile(B=lambda t: 0j, Phi=lambda t: 0j, G=lambda t: 0.0, rate=1.0)


def ket10():
    return density_from_pure(basis_ket("10"))


def analytic(prop, rho0, times):
    return Trajectory(times, prop.evolve(rho0, times))


def test_rhs_vanishes_without_couplings(rng):
    p = SystemParams(coupling_K=0.0)
    rho = random_density(rng)
    np.testing.assert_array_equal(me_rhs(p, bath_off(), 0.7, rho, rho), 0)


def test_singlet_is_exchange_eigenstate(params, lorentz_profile):
    bell = bell_psi_minus()
    H = exchange_hamiltonian(params.K)
    np.testing.assert_allclose(H @ bell - bell @ H, 0, atol=1e-15)
    with_drive = me_rhs(params, lorentz_profile, 0.4, bell, bell)
    without = me_rhs(params, lorentz_profile, 0.4, bell, bell, inhomogeneous=False)
    np.testing.assert_allclose(with_drive, without, atol=1e-15)


def test_rhs_traceless(params, lorentz_profile, rng):
    for _ in range(50):
        rho, rho0 = random_density(rng), random_density(rng)
        t = rng.uniform(0, 5)
        assert abs(np.trace(me_rhs(params, lorentz_profile, t, rho, rho0))) <= 1e-14


def test_rhs_rejects_nonfinite(params):
    prof = CorrelationProfile(B=lambda t: complex(np.nan), Phi=lambda t: 0j, G=lambda t: 0.0,
                              rate=1.0)
    with pytest.raises(FloatingPointError):
        me_rhs(params, prof, 0.1, bell_psi_minus(), bell_psi_minus())


def test_superoperator_matches_rhs(params, lorentz_profile, rng):
    rho, rho0 = random_density(rng), random_density(rng)
    t = 1.3
    S, D, Db = generator_parts(params)
    B = complex(lorentz_profile.B(t))
    hom = (t * S + B * D + B.conjugate() * Db) @ rho.reshape(16)
    ref = me_rhs(params, lorentz_profile, t, rho, rho0, inhomogeneous=False)
    np.testing.assert_allclose(hom.reshape(4, 4), ref, atol=1e-14)


def test_constant_trajectory(rng):
    rho = random_density(rng)
    tr = integrate_me(rho, SystemParams(coupling_K=0.0), bath_off(), 2.0, 0.01)
    np.testing.assert_allclose(tr.states, np.broadcast_to(rho, tr.states.shape), atol=1e-15)


def test_bell_matches_closed_form(params, lorentz):
    times = np.array([0.0, 0.5, 1.0, 2.0])
    prof = make_profile(lorentz, t_max=2.0)
    tr = integrate_me(bell_psi_minus(), params, prof, 2.0, step_bound(params, prof, 2.0), times=times)
    e = np.exp(-prof.G(times))[:, None, None]
    expect = e * bell_psi_minus() + (1 - e) * np.diag([0, 0, 0, 1.0])
    np.testing.assert_allclose(tr.states, expect, atol=1e-6)


def test_ket10_matches_solution(params, lorentz_profile):
    times = np.linspace(0, 5, 50)
    tr = integrate_me(ket10(), params, lorentz_profile, 5.0, step_bound(params, lorentz_profile, 5.0),
                      times=times)
    ref = analytic(Propagator(params, lorentz_profile), ket10(), times)
    np.testing.assert_allclose(tr.states[:, 2, 2], ref.states[:, 2, 2], atol=1e-6)
    assert max_deviation(tr, ref) <= 1e-6


@pytest.mark.parametrize("model", [Lorentzian(0.1, 1.0), Lorentzian(10.0, 1.0),
                                   OhmicLorentzDrude(1.0, 1.0), OhmicLorentzDrude(10.0, 1.0)],
                         ids=repr)
def test_random_state_matches_solution(model, rng):
    p = SystemParams(epsilon=2.0, coupling_K=0.7)
    prof = make_profile(model, t_max=4.0)
    rho = random_density(rng)
    times = np.linspace(0, 4, 21)
    tr = integrate_me(rho, p, prof, 4.0, step_bound(p, prof, 4.0), times=times)
    assert max_deviation(tr, analytic(Propagator(p, prof), rho, times)) <= 1e-6


def test_max_deviation():
    times = np.linspace(0, 1, 5)
    a = Trajectory(times, np.zeros((5, 4, 4)))
    assert max_deviation(a, a) == 0
    b = Trajectory(times, np.zeros((5, 4, 4)))
    b.states[3, 1, 2] = 1e-5
    assert max_deviation(a, b) == pytest.approx(1e-5)
    with pytest.raises(ValueError):
        max_deviation(a, Trajectory(times[:4], np.zeros((4, 4, 4))))
    with pytest.raises(ValueError):
        max_deviation(a, Trajectory(times + 0.1, np.zeros((5, 4, 4))))


def test_trajectory_validation():
    with pytest.raises(ValueError):
        Trajectory([0.0, 0.0], np.zeros((2, 4, 4)))
    with pytest.raises(ValueError):
        Trajectory([0.0, 1.0], np.zeros((3, 4, 4)))


def test_trace_conserved(params, lorentz_profile, rng):
    tr = integrate_me(random_density(rng), params, lorentz_profile, 5.0,
                      step_bound(params, lorentz_profile, 5.0))
    assert np.max(np.abs(np.trace(tr.states, axis1=1, axis2=2) - 1)) <= 1e-8
    np.testing.assert_array_equal(tr.states, np.conj(np.swapaxes(tr.states, 1, 2)))


def test_fourth_order_convergence(params, lorentz_profile):
    times = np.linspace(0, 5, 11)
    dt = step_bound(params, lorentz_profile, 5.0)
    run = [integrate_me(bell_psi_minus(), params, lorentz_profile, 5.0, dt / 2 ** k, times=times)
           for k in range(3)]
    ref = run[2].states + (run[2].states - run[1].states) / 15
    e = [np.max(np.abs(r.states - ref)) for r in run[:2]]
    assert e[0] / e[1] >= 8


def test_step_bound_enforced(params, lorentz_profile):
    bound = step_bound(params, lorentz_profile, 5.0)
    assert bound == pytest.approx(0.05 / (1 + 5))
    with pytest.raises(ValueError, match="violates"):
        integrate_me(bell_psi_minus(), params, lorentz_profile, 5.0, 1.01 * bound)


def test_drift_aborts(params):
    prof = CorrelationProfile(B=lambda t: 1e4 + 0j, Phi=lambda t: 0j, G=lambda t: 0.0, rate=1.0)
    with pytest.raises(OracleError, match="drift|non-finite"):
        integrate_me(bell_psi_minus(), params, prof, 1.0, 0.01)


def test_bad_snapshots(params, lorentz_profile):
    with pytest.raises(ValueError):
        integrate_me(bell_psi_minus(), params, lorentz_profile, 1.0, 0.005, times=[0.0, 2.0])
    with pytest.raises(ValueError):
        integrate_me(bell_psi_minus(), params, lorentz_profile, 1.0, 0.005, times=[0.5, 0.2])


@pytest.mark.parametrize("model", [Lorentzian(1.0, 1.0), OhmicLorentzDrude(1.0, 1.0)], ids=repr)
def test_diagonal_subdynamics(model, rng):
    p = SystemParams(coupling_K=1.3)
    prof = make_profile(model, t_max=3.0)
    pops = rng.dirichlet(np.ones(4))
    dt = step_bound(p, prof, 3.0)
    ts, ps = integrate_populations(p, prof, pops, 3.0, dt)
    tr = integrate_me(np.diag(pops).astype(complex), p, prof, 3.0, dt, times=ts)
    diag = np.diagonal(tr.states, axis1=1, axis2=2).real
    np.testing.assert_allclose(diag, ps, atol=1e-8)
    np.testing.assert_allclose(ps, u4(p, prof, ts) @ pops, atol=1e-8)


def test_lambda_conserves_probability(params, lorentz_profile):
    for t in (0.0, 0.3, 2.0):
        np.testing.assert_allclose(lambda_matrix(params, lorentz_profile, t).sum(axis=0), 0,
                                   atol=1e-15)


def test_inhomogeneous_term_matters(params, lorentz_profile, rng):
    rho = random_density(rng)
    times = np.linspace(0, 3, 16)
    dt = step_bound(params, lorentz_profile, 3.0)
    off = integrate_me(rho, params, lorentz_profile, 3.0, dt, times=times, inhomogeneous=False)
    ref = analytic(Propagator(params, lorentz_profile), rho, times)
    assert max_deviation(off, ref) > 1e-3


def test_homogeneous_blocks(params, lorentz_profile, rng):
    rho = random_density(rng)
    times = np.linspace(0, 3, 16)
    tr = integrate_me(rho, params, lorentz_profile, 3.0, step_bound(params, lorentz_profile, 3.0),
                      times=times, inhomogeneous=False)
    s = tr.states
    pops = u4(params, lorentz_profile, times) @ np.diag(rho).real
    np.testing.assert_allclose(np.diagonal(s, axis1=1, axis2=2).real, pops, atol=1e-8)
    pair = u2_1(params, lorentz_profile, times) @ np.array([rho[1, 2], rho[2, 1]])
    np.testing.assert_allclose(s[:, 1, 2], pair[:, 0], atol=1e-8)
    v = u2_2(params, lorentz_profile, times)
    np.testing.assert_allclose(np.stack([s[:, 0, 1], s[:, 2, 3]], -1),
                               v @ np.array([rho[0, 1], rho[2, 3]]), atol=1e-8)
    np.testing.assert_allclose(np.stack([s[:, 0, 2], s[:, 1, 3]], -1),
                               v @ np.array([rho[0, 2], rho[1, 3]]), atol=1e-8)
    np.testing.assert_allclose(s[:, 0, 3], np.exp(-2 * lorentz_profile.Phi(times)) * rho[0, 3],
                               atol=1e-8)


def test_rho34_drive_sign(params, lorentz_profile, rng):
    # the rho34 drive must mirror the rho24 one under qubit exchange
    rho = random_density(rng)
    times = np.linspace(0, 3, 16)
    tr = integrate_me(rho, params, lorentz_profile, 3.0, step_bound(params, lorentz_profile, 3.0),
                      times=times)
    prop = Propagator(params, lorentz_profile)
    ours = prop.evolve(rho, times)[:, 2, 3]
    flipped = ours + 2j * params.K * rho[0, 2] * prop.integrals().I2(times)
    assert np.max(np.abs(tr.states[:, 2, 3] - ours)) <= 1e-6
    assert np.max(np.abs(tr.states[:, 2, 3] - flipped)) > 1e-3


def test_R_round_trip(rng):
    rho = random_density(rng)
    r = to_R(rho)
    assert r[0] == rho[0, 0] and r[4] == rho[1, 2] and r[5] == rho[2, 1]
    assert r[14] == rho[0, 3] and r[15] == rho[3, 0]
    np.testing.assert_array_equal(from_R(r), rho)
    assert sorted(R_ORDER) == [(i, j) for i in range(4) for j in range(4)]
