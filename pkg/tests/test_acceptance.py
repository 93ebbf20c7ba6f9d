"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``[acceptance N] PASS|FAIL ...`` line (visible
even under output capture) before asserting.
"""
import time

import numpy as np
import pytest

from spinpair import cli
from spinpair.baths import CorrelationProfile, Lorentzian, OhmicLorentzDrude, make_profile
from spinpair.core import (SystemParams, basis_ket, bell_psi_minus, check_physical,
                           density_from_pure, random_density)
from spinpair.entanglement import concurrence, concurrence_bell, population, x_state_concurrence
from spinpair.oracle import Trajectory, integrate_me, max_deviation, step_bound
from spinpair.propagator import Propagator, evolve_bell, u4

SEED = 20240611


@pytest.fixture
def report(pytestconfig):
    capman = pytestconfig.pluginmanager.getplugin("capturemanager")

    def emit(n, ok, detail):
        with capman.global_and_fixture_disabled():
            print(f"\n[acceptance {n}] {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, detail
    return emit


def ket10():
    return density_from_pure(basis_ket("10"))


def test_01_oracle_equivalence(report):
    start = time.perf_counter()
    rng = np.random.default_rng(SEED)
    params = SystemParams(epsilon=2.0, coupling_K=1.0)          # K = gamma0
    states = {"bell": bell_psi_minus(), "ket10": ket10(), "random": random_density(rng)}
    times = np.linspace(0, 5, 51)
    worst, where = 0.0, None
    for ratio in (0.1, 1.0, 10.0):
        prof = make_profile(Lorentzian(ratio, 1.0), t_max=5.0)
        prop = Propagator(params, prof)
        dt = step_bound(params, prof, 5.0)
        for name, rho in states.items():
            tr = integrate_me(rho, params, prof, 5.0, dt, times=times)
            dev = max_deviation(tr, Trajectory(times, prop.evolve(rho, times)))
            if dev > worst:
                worst, where = dev, f"{name}, gamma/gamma0={ratio}"
    elapsed = time.perf_counter() - start
    report(1, worst <= 1e-6 and elapsed < 10,
           f"oracle equivalence: max deviation {worst:.2e} ({where}), {elapsed:.1f} s")


def test_02_bell_closed_forms(report):
    t = np.linspace(0, 5, 100)
    params = SystemParams(epsilon=2.0, coupling_K=1.0)
    dev = 0.0
    for model in (Lorentzian(1.0, 1.0), OhmicLorentzDrude(1.0, 1.0)):
        prof = make_profile(model)
        c = np.array([concurrence(r) for r in evolve_bell(model, params, t)])
        dev = max(dev, np.max(np.abs(c - np.exp(-prof.G(t)))))
    c_l = concurrence_bell(make_profile(Lorentzian(1.0, 1.0)), 1.0)
    c_o = concurrence_bell(make_profile(OhmicLorentzDrude(1.0, 1.0)), 1.0)
    ok = dev <= 1e-9 and abs(c_l - 0.69220) <= 1e-4 and abs(c_o - 0.67199) <= 1e-4
    report(2, ok, f"C = exp(-G): max deviation {dev:.1e}; C_lorentz(1) = {c_l:.6f}, "
                  f"C_ohmic(1) = {c_o:.6f}")


def test_03_lorentz_ordering(report):
    c = [concurrence_bell(make_profile(Lorentzian(r, 1.0)), 5.0) for r in (0.1, 1.0, 10.0)]
    report(3, c[0] > c[1] > c[2],
           "gamma0 t = 5: C(0.1) = {:.4g} > C(1) = {:.4g} > C(10) = {:.4g}".format(*c))


def test_04_ohmic_ordering(report):
    slow = concurrence_bell(make_profile(OhmicLorentzDrude(0.1, 1.0)), 5.0)
    fast = concurrence_bell(make_profile(OhmicLorentzDrude(10.0, 1.0)), 5.0)
    report(4, slow > fast, f"omega0 t = 5: C(0.1) = {slow:.4g} > C(10) = {fast:.4g}")


def test_05_generation_and_death(report):
    t = np.linspace(0, 5, 501)
    params = SystemParams(epsilon=2.0, coupling_K=1.0)
    peaks, shape_ok = {}, True
    for ratio in (0.1, 10.0):
        prop = Propagator(params, make_profile(Lorentzian(ratio, 1.0)))
        c = 2 * params.K * prop.integrals().I1(t)
        xs = np.array([x_state_concurrence(r) for r in prop.evolve(ket10(), t)])
        k = int(np.argmax(c))
        shape_ok &= bool(c[0] == 0 and 0 < k < t.size - 1 and np.all(np.diff(c[:k + 1]) > 0)
                         and np.all(np.diff(c[k:]) < 0) and np.allclose(xs, c, atol=1e-14))
        peaks[ratio] = c[k]
    report(5, shape_ok and peaks[0.1] > peaks[10.0],
           f"rise-peak-decay {'ok' if shape_ok else 'broken'}; "
           f"peak(0.1) = {peaks[0.1]:.4f} > peak(10) = {peaks[10.0]:.4f}")


def test_06_fig4_populations(report):
    out = cli.run_sweep(cli.figure_config("4"))

    def p01(name):
        lines = [l for l in out[name].splitlines() if not l.startswith("#")]
        col = lines[0].split(",").index("P01")
        return np.array([float(l.split(",")[col]) for l in lines[1:]])
    nm, mk = p01("fig4_bath.kind=lorentzian.csv"), p01("fig4_bath.kind=markovian.csv")
    ok = nm.max() > mk.max() and nm[-1] > mk[-1]
    report(6, ok, f"P01 peak {nm.max():.4f} (non-Markovian) vs {mk.max():.4f} (Markovian); "
                  f"at Kt = 5: {nm[-1]:.4f} vs {mk[-1]:.4f}")


def test_07_physicality_suite(report):
    rng = np.random.default_rng(SEED)
    params = SystemParams(epsilon=2.0, coupling_K=1.0)
    t = np.linspace(0, 5, 20)
    worst = {"trace": 0.0, "herm": 0.0, "eig": np.inf, "cols": 0.0}
    for model in (Lorentzian(1.0, 1.0), OhmicLorentzDrude(1.0, 1.0)):
        prop = Propagator(params, make_profile(model))
        worst["cols"] = max(worst["cols"], np.max(np.abs(u4(params, prop.profile, t).sum(-2) - 1)))
        for _ in range(500):
            for rho in prop.evolve(random_density(rng), t):
                r = check_physical(rho)
                worst["trace"] = max(worst["trace"], r.trace_error)
                worst["herm"] = max(worst["herm"], r.hermiticity_error)
                worst["eig"] = min(worst["eig"], r.min_eigenvalue)
    ok = (worst["trace"] <= 1e-10 and worst["herm"] <= 1e-10 and worst["eig"] >= -1e-8
          and worst["cols"] <= 1e-12)
    report(7, ok, "trace {trace:.1e}, hermiticity {herm:.1e}, min eigenvalue {eig:.3e}, "
                  "u4 column sums {cols:.1e}".format(**worst))


def test_08_short_time_exchange(report):
    off = CorrelationProfile(B=lambda t: 0j, Phi=lambda t: 0j,
                             G=lambda t: np.zeros(np.shape(t)), rate=1.0)
    worst = 0.0
    for K in (0.5, 1.0, 3.0):
        prop = Propagator(SystemParams(coupling_K=K), off)
        t = np.linspace(0, 0.1 / K, 101)[1:]
        rho = prop.evolve(ket10(), t)
        p01 = np.array([population(r, 3) for r in rho])
        assert np.allclose(p01, 0.5 * (1 - np.exp(-2 * K * K * t * t)), atol=1e-15)
        worst = max(worst, np.max(np.abs(p01 - np.sin(K * t) ** 2) / (10 * (K * t) ** 4)))
    report(8, worst <= 1, f"|rho33 - sin^2(Kt)| / (10 (Kt)^4) <= {worst:.3f} for Kt <= 0.1")


def test_09_convergence_order(report):
    params = SystemParams(epsilon=2.0, coupling_K=1.0)
    prof = make_profile(Lorentzian(1.0, 1.0), t_max=5.0)
    times = np.linspace(0, 5, 11)
    dt = step_bound(params, prof, 5.0)
    runs = [integrate_me(bell_psi_minus(), params, prof, 5.0, dt / 2 ** k, times=times).states
            for k in range(3)]
    ref = runs[2] + (runs[2] - runs[1]) / 15          # Richardson, order 4
    e0, e1 = (np.max(np.abs(r - ref)) for r in runs[:2])
    report(9, e0 / e1 >= 8, f"step halving: error {e0:.2e} -> {e1:.2e}, ratio {e0 / e1:.1f}")


def test_10_determinism(report, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("system.epsilon = 2\nsystem.K = 1\nbath.kind = ohmic\nbath.cutoff_ratio = 0.1\n"
                   "initial_state = ket10\nhorizon.t_end = 5\nhorizon.samples = 51\n"
                   "outputs = concurrence_x, populations, purity, density\nvalidate = true\n")
    blobs = []
    for k in range(3):
        out = tmp_path / f"out{k}.csv"
        assert cli.main(["evolve", str(cfg), "--out", str(out)]) == 0
        blobs.append(out.read_bytes())
    same = all(b == blobs[0] for b in blobs)
    report(10, same, f"{len(blobs)} runs, {len(blobs[0])} bytes each, "
                     f"{'byte-identical' if same else 'differ'}")
