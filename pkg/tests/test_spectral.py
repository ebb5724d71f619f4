import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nlshier import hierarchy as H, solutions as S, spectral as sp
from nlshier.diffpoly import CONJ, NEG_CONJ, substitute
from nlshier.hierarchy import CoefficientTable

EMPTY = {j: CoefficientTable(j) for j in range(1, 6)}
NLS = H.extract_coefficients(H.nls_hierarchy_equation(1))
FOCUSING = H.extract_coefficients(H.nls_hierarchy_equation(1, NEG_CONJ))


def test_grid():
    g = sp.Grid(80.0, 16)
    assert g.modes[8] == -8 and g.wavenumbers[1] == pytest.approx(2 * math.pi / 80)
    assert g.derivative_multiplier(1)[8] == 0 and g.derivative_multiplier(2)[8] != 0
    with pytest.raises(ValueError):
        sp.Grid(1.0, 7)


def test_round_trip():
    g = sp.Grid.torus(64)
    u = sp.random_smooth_data(g, 10, 1.0, 3).values
    assert np.max(np.abs(np.fft.ifft(np.fft.fft(u)) - u)) <= 1e-13 * np.max(np.abs(u))


def test_linear_phase():
    g = sp.Grid.torus(8)
    assert sp.linear_phase(2, g, 0.3)[0] == 1
    assert sp.linear_phase(1, g, math.pi)[1] == pytest.approx(-1)
    for j in (1, 2, 5):
        assert np.allclose(np.abs(sp.linear_phase(j, g, 0.123)), 1)


def test_rhs_examples():
    g = sp.Grid.torus(16)
    zero = sp.FieldState(g, np.zeros(16))
    assert not np.any(sp.eval_rhs(NLS, zero))
    c = 0.3 - 0.4j
    const = sp.FieldState(g, np.full(16, c))
    assert np.allclose(sp.nonlinearity_physical(NLS, const), 2 * abs(c) ** 2 * c)
    wave = sp.FieldState(g, np.exp(1j * g.x))
    assert np.allclose(sp.nonlinearity_physical(S.torus_table(2), wave), -np.exp(1j * g.x), atol=1e-13)


def test_rhs_rejects_small_pad():
    g = sp.Grid.torus(16)
    with pytest.raises(ValueError):
        sp.eval_rhs(NLS, sp.FieldState(g, np.ones(16)), pad=1)
    with pytest.raises(ValueError):
        sp.SimConfig(dt=0.1, T=1, dealias_pad=1).pad_for(NLS)
    assert sp.required_pad(H.extract_coefficients(H.nls_hierarchy_equation(2))) == 3


def test_free_step_is_linear_phase():
    g = sp.Grid(30.0, 64)
    u0 = sp.random_smooth_data(sp.Grid(30.0, 64), 8, 1.0, 5)
    traj = sp.integrate(EMPTY[2], u0, sp.SimConfig(dt=0.02, T=0.02))
    expect = np.fft.ifft(sp.linear_phase(2, g, 0.02) * u0.spectrum)
    assert np.max(np.abs(traj.final.values - expect)) <= 1e-14
    assert abs(traj.final.l2() - u0.l2()) <= 1e-13 * u0.l2()


@given(st.integers(1, 5), st.floats(1e-4, 3.0), st.integers(0, 100))
def test_free_flow_unitary(j, dt, seed):
    u0 = sp.random_smooth_data(sp.Grid.torus(32), 12, 1.0, seed)
    traj = sp.integrate(EMPTY[j], u0, sp.SimConfig(dt=dt, T=5 * dt))
    assert abs(traj.final.l2() - u0.l2()) <= 1e-12 * u0.l2()


def test_free_flow_dt_independent():
    u0 = sp.random_smooth_data(sp.Grid.torus(32), 8, 1.0, 2)
    exact = sp.free_evolution(2, u0, 0.5).values
    for dt in (0.1, 0.05, 0.01):
        fin = sp.integrate(EMPTY[2], u0, sp.SimConfig(dt=dt, T=0.5)).final.values
        assert sp.l2_distance(fin, exact, u0.grid) <= 1e-13 * u0.l2()


def test_plane_wave_stationary():
    g = sp.Grid.torus(16)
    u0 = sp.FieldState(g, np.exp(1j * g.x))
    traj = sp.integrate(S.torus_table(2), u0, sp.SimConfig(dt=0.01, T=1.0, snapshot_stride=10))
    assert max(np.max(np.abs(s.values - u0.values)) for s in traj.states) <= 1e-10


def test_nan_abort():
    g = sp.Grid.torus(128)
    table = H.extract_coefficients(H.nls_hierarchy_equation(2))
    u0 = sp.random_smooth_data(g, 6, 3.0, 0)
    with np.errstate(all="ignore"), pytest.raises(sp.NumericAbort) as err:
        sp.integrate(table, u0, sp.SimConfig(dt=0.01, T=1.0))
    assert err.value.step >= 1
    bad = sp.FieldState(g, np.full(128, np.nan))
    with pytest.raises(sp.NumericAbort):
        sp.integrate(table, bad, sp.SimConfig(dt=0.01, T=1.0))


def test_mass_conserved_on_free_flow():
    u0 = sp.random_smooth_data(sp.Grid.torus(64), 8, 1.0, 4)
    traj = sp.integrate(EMPTY[3], u0, sp.SimConfig(dt=0.05, T=1.0))
    mass = substitute(H.conserved_density(1), CONJ)
    assert sp.conserved_scan([mass], traj).drift[0] <= 1e-12


def test_nls_soliton_energy_drift():
    a = S.AnsatzField.soliton(1)
    g = sp.Grid(80.0, 512)
    u0 = sp.FieldState(g, a.value(g.x, 0.0))
    traj = sp.integrate(FOCUSING, u0, sp.SimConfig(dt=1e-3, T=1.0, snapshot_stride=100))
    dens = [substitute(H.conserved_density(n), NEG_CONJ) for n in (1, 3)]
    drift = sp.conserved_scan(dens, traj).drift
    assert max(drift) <= 1e-8
    assert sp.l2_distance(traj.final.values, a.value(g.x, 1.0), g) <= 1e-8


def test_density_evaluator_exact_on_trig_polynomials():
    g = sp.Grid.torus(32)
    u = sp.FieldState(g, 2 * np.exp(3j * g.x))
    mass = substitute(H.conserved_density(1), CONJ)  # -(2i)^{-1} |u|^2
    assert sp.DensityEvaluator(mass)(u) == pytest.approx(complex(0.5j * 4 * 2 * math.pi))


def test_gauge_covariance():
    u0 = sp.random_smooth_data(sp.Grid.torus(64), 6, 1.0, 7)
    cfg = sp.SimConfig(dt=1e-3, T=0.2)
    base = sp.integrate(NLS, u0, cfg).final.values
    phase = np.exp(0.83j)
    rot = sp.integrate(NLS, sp.FieldState(u0.grid, phase * u0.values), cfg).final.values
    assert np.max(np.abs(rot - phase * base)) <= 1e-10


def test_dealias_pad_sufficiency():
    table = H.extract_coefficients(H.nls_hierarchy_equation(2))
    u0 = sp.random_smooth_data(sp.Grid.torus(64), 6, 0.2, 8)
    a = sp.integrate(table, u0, sp.SimConfig(dt=1e-4, T=0.01, dealias_pad=3)).final.values
    b = sp.integrate(table, u0, sp.SimConfig(dt=1e-4, T=0.01, dealias_pad=3.5)).final.values
    assert sp.l2_distance(a, b, u0.grid) <= 1e-12


def test_scaling_covariance():
    table = S.fit_equation_for_ansatz(2).table(8)
    a = S.AnsatzField.soliton(2)
    lam, T, dt = 2.0, 0.02, 1e-3
    g = sp.Grid(80.0, 1024)
    base = sp.integrate(table, sp.FieldState(g, a.value(g.x, 0.0)), sp.SimConfig(dt=dt, T=T)).final.values
    gs = sp.Grid(80.0 / lam, 1024)
    u0s = sp.FieldState(gs, lam * a.value(lam * gs.x, 0.0))
    scaled = sp.integrate(table, u0s, sp.SimConfig(dt=dt / lam ** 4, T=T / lam ** 4)).final.values
    assert np.max(np.abs(scaled - lam * base)) <= 1e-5


def test_convergence_orders():
    table = S.fit_equation_for_ansatz(2).table(8)
    exact = S.AnsatzField.soliton(2)
    res = sp.convergence_study(table, exact, [0.05 / 2 ** k for k in range(4, 7)], sp.Grid(80.0, 512), 0.05)
    assert 3.7 <= res.order <= 4.3
    free = sp.convergence_study(EMPTY[2], S.AnsatzField.plane_wave(2, a=0.0), [0.1, 0.05], sp.Grid.torus(8), 0.1)
    assert max(free.errors) == 0.0 and math.isnan(free.order)


def test_spectral_accuracy_in_resolution():
    table = S.fit_equation_for_ansatz(2).table(8)
    a = S.AnsatzField.soliton(2)
    errs = []
    for M in (128, 256, 512):
        g = sp.Grid(80.0, M)
        fin = sp.integrate(table, sp.FieldState(g, a.value(g.x, 0.0)),
                           sp.SimConfig(dt=2e-4, T=0.01)).final.values
        errs.append(sp.l2_distance(fin, a.value(g.x, 0.01), g))
    assert errs[1] < errs[0] / 100 and errs[2] < errs[1] / 100


def test_select_dt_halves_until_converged():
    u0 = sp.random_smooth_data(sp.Grid.torus(32), 4, 0.3, 1)
    sel = sp.select_dt(NLS, u0, 0.2, 0.1, tol=1e-9)
    assert sel.history[-1][1] < 1e-9
    assert all(c >= 1e-9 for _, c in sel.history[:-1])
