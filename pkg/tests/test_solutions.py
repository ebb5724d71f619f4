import math
from fractions import Fraction

import numpy as np
import pytest

from nlshier import solutions as S
from nlshier.diffpoly import DerivativeSlot as D, DiffPolynomial as P, var
from nlshier.gaussian import GaussianRational as G
from nlshier.hierarchy import CoefficientTable
from nlshier.spectral import Grid

u, ub = var("u"), var("ubar")
ux, ubx, uxx, ubxx = var("u", 1), var("ubar", 1), var("u", 2), var("ubar", 2)


def j2_poly(c_uuxx, c_u2ubxx, c_uxubx, c_ux2, c_quintic):
    return (c_uuxx * u * ub * uxx + c_u2ubxx * u ** 2 * ubxx + c_uxubx * u * ux * ubx
            + c_ux2 * ux ** 2 * ub + c_quintic * u ** 3 * ub ** 2)


def test_soliton_params():
    assert (S.soliton_params(2, 1).delta0, S.soliton_params(2, 1).c0) == (4, 0)
    assert (S.soliton_params(2, 2).delta0, S.soliton_params(2, 2).c0) == (7, 24)
    for N in (Fraction(1, 3), 2, 5):
        p = S.soliton_params(1, N)
        assert (p.delta0, p.c0) == (1 - N ** 2, 2 * N)
    with pytest.raises(ValueError):
        S.soliton_params(0, 1)


def test_ansatz_values():
    assert S.eval_ansatz(S.AnsatzField.soliton(2), 0.0, 0.0) == pytest.approx(1.0)
    x = np.linspace(-3, 3, 7)
    pw = S.AnsatzField.plane_wave(2)
    for t in (0.0, 1.7, 40.0):
        assert np.allclose(pw.value(x, t), np.exp(1j * x), atol=1e-15)


@pytest.mark.parametrize("j,N,omega", [(2, 1.0, 2.0), (1, 0.7, 1.5), (3, 1.2, 0.8)])
def test_scaling_law(j, N, omega):
    x = np.linspace(-2, 2, 9)
    t = 0.013
    big = S.AnsatzField.soliton(j, N=N, omega=omega).value(x, t)
    base = S.AnsatzField.soliton(j, N=N / omega, omega=1.0).value(omega * x, omega ** (2 * j) * t)
    assert np.allclose(big, omega * base, rtol=1e-13, atol=1e-14)


def test_sech_identities():
    f, fp = S.sech_derivative(0), S.sech_derivative(1)
    assert (fp * fp).terms == {(0, 2, 0): 1, (0, 4, 0): -1}
    assert S.sech_derivative(2).terms == {(0, 1, 0): 1, (0, 3, 0): -2}
    for n in range(0, 6):
        assert S.sech_identity_coefficients(2 * n)[0] == 1


def test_j1_family_is_focusing_cubic():
    fam = S.fit_equation_for_ansatz(1)
    assert fam.nullspace == ()
    assert fam.polynomial() == -2 * u ** 2 * ub


def test_j2_family():
    fam = S.fit_equation_for_ansatz(2)
    assert fam.free_params == ("lambda",)
    for lam in (0, 8, 14, Fraction(-7, 3)):
        assert fam.polynomial(lam) == j2_poly(lam, 2, 4, 14 - lam, lam - 2)
        assert not S.symbolic_residual(2, fam.polynomial(lam)).terms


def test_printed_family_only_solves_at_one_point():
    # the printed coefficients (lam, 44-3lam, 6lam-80, 56-4lam, 40-2lam), third monomial read as |u_x|^2 u
    def printed(lam):
        return j2_poly(lam, 44 - 3 * lam, 6 * lam - 80, 56 - 4 * lam, 40 - 2 * lam)
    assert not S.symbolic_residual(2, printed(14)).terms
    res = S.symbolic_residual(2, printed(8)).terms
    assert res == {(2, 3, 0): G(168 - 12 * 8)}
    assert printed(14) == S.fit_equation_for_ansatz(2).polynomial(14)


def test_printed_lambda8_table_fails_numerically():
    table = CoefficientTable.from_polynomial(2, j2_poly(8, 20, -32, 24, 24))
    grid = Grid(80.0, 2048)
    assert S.residual_norm(table, S.AnsatzField.soliton(2), grid, 0.0, relative=True) > 0.5


def test_j3_family_dimension():
    fam = S.fit_equation_for_ansatz(3)
    assert len(fam.basis) == 15 and len(fam.nullspace) == 6
    lams = [1, -2, 0, 3, Fraction(1, 2), 5]
    assert not S.symbolic_residual(3, fam.polynomial(*lams)).terms


@pytest.mark.parametrize("lam", [0, 8, 14])
def test_numeric_residual(lam):
    table = S.fit_equation_for_ansatz(2).table(lam)
    res = S.residual_norm(table, S.AnsatzField.soliton(2), Grid(80.0, 2048), 0.37, relative=True)
    assert res <= 1e-8


def test_residual_decays_spectrally():
    table = S.fit_equation_for_ansatz(2).table(8)
    a = S.AnsatzField.soliton(2)
    res = [S.residual_norm(table, a, Grid(80.0, M), 0.0, relative=True) for M in (128, 256, 512)]
    assert res[1] < res[0] / 100 and res[2] < res[1] / 1e5


def test_plane_wave_residuals():
    g = Grid.torus(16)
    assert S.residual_norm(S.torus_table(2), S.AnsatzField.plane_wave(2), g, 0.5) <= 1e-12
    # d^8 amplifies rounding by up to 4^8 on eight points
    assert S.residual_norm(S.torus_table(4), S.AnsatzField.plane_wave(4), Grid.torus(8), 0.5) <= 1e-10
    # odd j: the printed sign fails, the flipped sign solves
    assert S.residual_norm(S.torus_table(3, 1), S.AnsatzField.plane_wave(3), Grid.torus(8), 0.5) > 1
    assert S.residual_norm(S.torus_table(3, -1), S.AnsatzField.plane_wave(3), Grid.torus(8), 0.5) <= 1e-10
    assert S.torus_plane_wave_solves(2) and not S.torus_plane_wave_solves(3)


def test_zero_field_residual():
    table = S.fit_equation_for_ansatz(2).table(8)
    g = Grid(80.0, 256)
    zero = S.AnsatzField.plane_wave(2, a=0.0)
    assert S.residual_norm(table, zero, g, 0.0) == 0.0


def test_torus_table_entry():
    (e,) = S.torus_table(3).entries
    assert (e.k, e.alpha, e.conj, e.coeff) == (1, (4, 0, 0), ("+", "-", "+"), G(1))


def test_separation():
    for j, s, N in ((2, 0, 1), (3, 0.5, 2.0), (1, -1, 3.0)):
        sep = S.illposedness_separation(j, s, 1, N)
        w = (1 + N ** 2) ** (s / 2) * N ** (-s)
        assert sep.norm_at_tn / w == pytest.approx(3)
        assert sep.t_n == pytest.approx(math.pi * N ** (2 * s + 2 - 2 * j) / 3)
    for n in range(1, 9):
        sep = S.illposedness_separation(2, 0, n)
        assert sep.norm_at_tn_exact == 2 + Fraction(1, n) and sep.norm_at_0_exact == Fraction(1, n)
    far = S.illposedness_separation(2, 0.5, 10 ** 6, 2.0)
    w = (1 + 4) ** 0.25 / 2 ** 0.5
    assert far.norm_at_0 < 1e-5 and far.norm_at_tn == pytest.approx(2 * w, rel=1e-5)


def test_separation_matches_field_difference():
    g = Grid.torus(16)
    for n in (1, 3):
        sep = S.illposedness_separation(2, 0, n)
        a = S.AnsatzField.plane_wave(2, a=1.0).value(g.x, sep.t_n)
        b = S.AnsatzField.plane_wave(2, a=1 + 1 / n).value(g.x, sep.t_n)
        assert np.sqrt(np.mean(np.abs(a - b) ** 2)) == pytest.approx(2 + 1 / n, abs=1e-12)


def test_c3_symbols():
    assert S.c3_resonant_symbol(5, -5, 5) == (Fraction(150), 0)
    N = 7
    assert S.c3_resonant_symbol(N, -1, 1) == (Fraction((N - 1) ** 2) + Fraction(3, 2) * (N + 1) ** 2, 0)
    assert S.c3_resonant_symbol(0, 0, 0) == (0, 0)


def test_c3_restricted_constellations():
    for N in (2, 16, 1024):
        groups = S.c3_constellations(N)
        assert sorted(groups[N]) == sorted([(N, -N, N), (N, -1, 1), (1, -1, N)])
        assert sum(map(len, groups.values())) == 8


def test_c3_unrestricted_counterexample():
    # drawing k2 from +N as well admits (N, N, -N): resonant with n_3 = 4 N^2
    N = 9
    assert S.c3_resonant_symbol(N, N, -N) == (Fraction(4 * N * N), 0)
