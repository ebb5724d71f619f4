"""Explicit solution families, the equations they solve, and residual oracles."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from math import comb

import numpy as np

from .diffpoly import DerivativeSlot, DiffPolynomial, to_pretty
from .gaussian import I, ONE, ZERO, GaussianRational
from .hierarchy import CoefficientTable, TableEntry


# soliton parameters ---------------------------------------------------

@dataclass(frozen=True)
class SolitonParams:
    j: int
    N: float
    delta0: float
    c0: float


def delta0_coeffs(j: int) -> dict[int, int]:
    """delta_0 as {power of N: integer coefficient}."""
    return {2 * (j - n): (-1) ** (n + 1) * comb(2 * j, 2 * n) for n in range(j + 1)}


def c0_coeffs(j: int) -> dict[int, int]:
    return {2 * (j - n) - 1: (-1) ** n * comb(2 * j, 2 * n + 1) for n in range(j)}


def _poly_at(coeffs, N):
    return sum(c * N ** p for p, c in coeffs.items())


def soliton_params(j: int, N) -> SolitonParams:
    """Phase rate and speed making exp(i(Nx + delta0 t)) sech(x - c0 t) solve an NLS-like equation.

    Exact when ``N`` is an int or Fraction.  For j = 1 this is the focusing
    cubic NLS soliton with delta0 = 1 - N^2 and c0 = 2N.
    """
    if j < 1 or not N > 0:
        raise ValueError("need j >= 1 and N > 0")
    return SolitonParams(j, N, _poly_at(delta0_coeffs(j), N), _poly_at(c0_coeffs(j), N))


# ansatz fields --------------------------------------------------------

@dataclass(frozen=True)
class AnsatzField:
    """``soliton`` with params (j, N, omega) or ``torus-plane-wave`` with (j, s, N, a)."""

    kind: str
    j: int
    N: float = 1.0
    omega: float = 1.0
    s: float = 0.0
    a: complex = 1.0

    @classmethod
    def soliton(cls, j, N=1.0, omega=1.0):
        return cls("soliton", j, N=N, omega=omega)

    @classmethod
    def plane_wave(cls, j, s=0.0, N=1.0, a=1.0):
        return cls("torus-plane-wave", j, N=N, s=s, a=a)

    def __post_init__(self):
        if self.kind not in ("soliton", "torus-plane-wave"):
            raise ValueError(f"unknown ansatz {self.kind!r}")

    def _soliton_parts(self, x, t):
        w = self.omega
        p = soliton_params(self.j, self.N / w)
        xs, ts = w * np.asarray(x, dtype=float), w ** (2 * self.j) * t
        y = xs - p.c0 * ts
        phase = np.exp(1j * ((self.N / w) * xs + p.delta0 * ts))
        f = 1.0 / np.cosh(y)
        return p, phase, f, -f * np.tanh(y)

    def _plane_rate(self):
        j, N, s = self.j, self.N, self.s
        return -N ** (2 * j) + N ** (2 * j - 2 - 2 * s) * abs(self.a) ** 2

    def value(self, x, t):
        if self.kind == "soliton":
            _, phase, f, _ = self._soliton_parts(x, t)
            return self.omega * phase * f
        x = np.asarray(x, dtype=float)
        return self.N ** (-self.s) * self.a * np.exp(1j * (self.N * x + self._plane_rate() * t))

    def time_derivative(self, x, t):
        if self.kind == "soliton":
            p, phase, f, fp = self._soliton_parts(x, t)
            w = self.omega
            return w ** (2 * self.j + 1) * phase * (1j * p.delta0 * f - p.c0 * fp)
        return 1j * self._plane_rate() * self.value(x, t)


def eval_ansatz(a: AnsatzField, x, t):
    v = a.value(x, t)
    return complex(v) if np.ndim(v) == 0 else v


def torus_plane_wave_solves(j: int) -> bool:
    """Whether the plane-wave family solves i u_t + (-1)^{j+1} d^{2j} u = |u|^2 d^{2j-2} u.

    Substituting gives (-1)^{j-1} = -1, so it holds for even j only; for odd j
    the nonlinearity needs the opposite sign.
    """
    return j % 2 == 0


def torus_table(j: int, sign: int = 1) -> CoefficientTable:
    """|u|^2 d^{2j-2} u with coefficient ``sign``."""
    return CoefficientTable(j, (TableEntry(1, (2 * j - 2, 0, 0), ("+", "-", "+"),
                                           GaussianRational(sign)),))


# sech reduction -------------------------------------------------------
#
# Every expression is a polynomial in N, f and f' with f' appearing at most
# linearly; keys are (power of N, power of f, 0 or 1 for f').

class SechExpr:
    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {k: v for k, v in (terms or {}).items() if v}

    def __add__(self, other):
        t = dict(self.terms)
        for k, v in other.terms.items():
            t[k] = t.get(k, ZERO) + v
        return SechExpr(t)

    def __sub__(self, other):
        return self + other.scale(-ONE)

    def scale(self, c, n_power=0):
        c = GaussianRational.coerce(c)
        return SechExpr({(n + n_power, m, p): v * c for (n, m, p), v in self.terms.items()})

    def __mul__(self, other):
        t = {}
        for (n1, m1, p1), a in self.terms.items():
            for (n2, m2, p2), b in other.terms.items():
                c = a * b
                if p1 and p2:
                    # f'^2 = f^2 - f^4
                    for m, s in ((m1 + m2 + 2, 1), (m1 + m2 + 4, -1)):
                        k = (n1 + n2, m, 0)
                        t[k] = t.get(k, ZERO) + c * s
                else:
                    k = (n1 + n2, m1 + m2, p1 + p2)
                    t[k] = t.get(k, ZERO) + c
        return SechExpr(t)

    def derive(self):
        """d/dy using f'' = f - 2 f^3 and f'^2 = f^2 - f^4."""
        t = {}

        def put(k, v):
            t[k] = t.get(k, ZERO) + v

        for (n, m, p), c in self.terms.items():
            if p == 0:
                if m:
                    put((n, m - 1, 1), c * m)
            else:
                if m:
                    put((n, m + 1, 0), c * m)
                    put((n, m + 3, 0), -c * m)
                put((n, m + 1, 0), c)
                put((n, m + 3, 0), c * -2)
        return SechExpr(t)

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        return isinstance(other, SechExpr) and self.terms == other.terms


_F_DERIVS = [SechExpr({(0, 1, 0): ONE})]


def sech_derivative(b: int) -> SechExpr:
    """f^{(b)} reduced to the basis {f^m, f^m f'}."""
    while len(_F_DERIVS) <= b:
        _F_DERIVS.append(_F_DERIVS[-1].derive())
    return _F_DERIVS[b]


def sech_identity_coefficients(n: int) -> list[Fraction]:
    """c_{n,m} with f^{(2n)} = sum_m c_{n,m} f^{2m+1}."""
    e = sech_derivative(2 * n)
    out = []
    for m in range(n + 1):
        c = e.terms.get((0, 2 * m + 1, 0), ZERO)
        out.append(c.re)
    return out


def _factor(order: int, conj: bool) -> SechExpr:
    # e^{-i theta} d^a (e^{i theta} f) = sum_b C(a,b) (iN)^{a-b} f^{(b)}, conjugated for ubar
    unit = GaussianRational(0, -1 if conj else 1)
    acc = SechExpr()
    for b in range(order + 1):
        acc = acc + sech_derivative(b).scale(unit ** (order - b) * comb(order, b), order - b)
    return acc


def monomial_on_soliton(key) -> SechExpr:
    acc = SechExpr({(0, 0, 0): ONE})
    for slot, m in key:
        if slot.variable not in ("u", "ubar"):
            raise ValueError("monomial must be in u, ubar")
        fac = _factor(slot.order, slot.variable == "ubar")
        for _ in range(m):
            acc = acc * fac
    return acc


def linear_part_on_soliton(j: int) -> SechExpr:
    """e^{-i theta} (i d_t + (-1)^{j+1} d_x^{2j}) u_N as an expression in N and f."""
    acc = SechExpr()
    for p, c in delta0_coeffs(j).items():
        acc = acc + SechExpr({(p, 1, 0): GaussianRational(-c)})
    for p, c in c0_coeffs(j).items():
        acc = acc + SechExpr({(p, 0, 1): GaussianRational(0, -c)})
    return acc + _factor(2 * j, False).scale((-1) ** (j + 1))


def nls_basis(j: int) -> list[tuple]:
    """Monomial keys with k+1 factors u, k factors ubar and 2(j-k) derivatives."""
    keys = set()
    for k in range(1, j + 1):
        d = 2 * (j - k)
        for orders in product(range(d + 1), repeat=2 * k + 1):
            if sum(orders) != d:
                continue
            powers = {}
            for i, a in enumerate(orders):
                s = DerivativeSlot("u" if i % 2 == 0 else "ubar", a)
                powers[s] = powers.get(s, 0) + 1
            keys.add(DiffPolynomial.monomial(powers).terms.keys().__iter__().__next__())
    return sorted(keys, key=lambda key: (sum(m for _, m in key), _basis_rank(key)))


def _basis_rank(key):
    # highest single derivative on u first, then on ubar
    top_u = max((s.order for s, _ in key if s.variable == "u"), default=0)
    top_b = max((s.order for s, _ in key if s.variable == "ubar"), default=0)
    return (-top_u, -top_b, key)


# exact linear algebra over Q(i) --------------------------------------

def solve_affine(rows: list[list[GaussianRational]], rhs: list[GaussianRational]):
    """Particular solution and nullspace basis of ``rows @ x = rhs``.

    Free variables are the non-pivot columns of the reduced row echelon form,
    so later columns are preferred as free.  Raises ValueError if inconsistent.
    """
    ncol = len(rows[0]) if rows else 0
    a = [list(r) + [b] for r, b in zip(rows, rhs)]
    pivots = []
    row = 0
    for col in range(ncol):
        piv = next((i for i in range(row, len(a)) if a[i][col]), None)
        if piv is None:
            continue
        a[row], a[piv] = a[piv], a[row]
        inv = ONE / a[row][col]
        a[row] = [v * inv for v in a[row]]
        for i in range(len(a)):
            if i != row and a[i][col]:
                f = a[i][col]
                a[i] = [v - f * w for v, w in zip(a[i], a[row])]
        pivots.append(col)
        row += 1
    for i in range(row, len(a)):
        if a[i][-1]:
            raise ValueError("inconsistent linear system")
    free = [c for c in range(ncol) if c not in pivots]
    part = [ZERO] * ncol
    for i, c in enumerate(pivots):
        part[c] = a[i][-1]
    null = []
    for fc in free:
        v = [ZERO] * ncol
        v[fc] = ONE
        for i, c in enumerate(pivots):
            v[c] = -a[i][fc]
        null.append(v)
    return part, null, free


# fitted families ------------------------------------------------------

@dataclass(frozen=True)
class FittedFamily:
    """Nonlinearities ``sum_m (particular_m + sum_l lambda_l null_l[m]) * basis_m``."""

    j: int
    basis: tuple
    particular: tuple
    nullspace: tuple
    free_params: tuple

    def coefficients(self, *lams) -> list[GaussianRational]:
        if len(lams) != len(self.nullspace):
            raise ValueError(f"expected {len(self.nullspace)} parameter values")
        out = list(self.particular)
        for lam, vec in zip(lams, self.nullspace):
            lam = GaussianRational.coerce(lam)
            out = [o + lam * v for o, v in zip(out, vec)]
        return out

    def polynomial(self, *lams) -> DiffPolynomial:
        return DiffPolynomial({k: c for k, c in zip(self.basis, self.coefficients(*lams))})

    def table(self, *lams) -> CoefficientTable:
        return CoefficientTable.from_polynomial(self.j, self.polynomial(*lams))

    def to_json(self) -> dict:
        terms = []
        for i, key in enumerate(self.basis):
            terms.append({
                "monomial": to_pretty(DiffPolynomial({key: 1})),
                "constant": str(self.particular[i]),
                "per_param": [str(v[i]) for v in self.nullspace],
            })
        return {"j": self.j, "free_params": list(self.free_params), "terms": terms}


def fit_equation_for_ansatz(j: int, free_monomials=None) -> FittedFamily:
    """All NLS-like nonlinearities (in the canonical u/ubar pattern) solved by the soliton.

    Substitutes the ansatz into every admissible monomial, reduces with the
    sech identities and solves the resulting linear system exactly in N.
    ``free_monomials`` lists basis keys to prefer as free coordinates; by
    default |u|^2 d^{2j-2} u is preferred.
    """
    if j < 1:
        raise ValueError("j must be positive")
    basis = nls_basis(j)
    if free_monomials is None:
        free_monomials = [DiffPolynomial.monomial(
            {DerivativeSlot("u", 2 * j - 2): 1, DerivativeSlot("u", 0): 1,
             DerivativeSlot("ubar", 0): 1} if j > 1 else
            {DerivativeSlot("u", 0): 2, DerivativeSlot("ubar", 0): 1}).terms.keys().__iter__().__next__()]
    order = [k for k in basis if k not in free_monomials] + [k for k in basis if k in free_monomials]
    exprs = {k: monomial_on_soliton(k) for k in basis}
    target = linear_part_on_soliton(j)
    keys = sorted(set(target.terms).union(*(e.terms for e in exprs.values())))
    rows = [[exprs[b].terms.get(key, ZERO) for b in order] for key in keys]
    rhs = [target.terms.get(key, ZERO) for key in keys]
    part, null, free = solve_affine(rows, rhs)
    idx = [order.index(b) for b in basis]
    particular = tuple(part[i] for i in idx)
    nullspace = tuple(tuple(v[i] for i in idx) for v in null)
    names = ("lambda",) if len(null) == 1 else tuple(f"lambda_{i + 1}" for i in range(len(null)))
    return FittedFamily(j, tuple(basis), particular, nullspace, names)


def symbolic_residual(j: int, nonlinearity: DiffPolynomial) -> SechExpr:
    """Linear part minus nonlinearity on the soliton; empty exactly when it solves."""
    acc = linear_part_on_soliton(j)
    for key, c in nonlinearity.terms.items():
        acc = acc - monomial_on_soliton(key).scale(c)
    return acc


# numeric residual -----------------------------------------------------

def spectral_derivative(values, L, order):
    if order == 0:
        return values
    M = len(values)
    xi = 2 * np.pi * np.fft.fftfreq(M, d=L / M)
    if order % 2 == 1:
        xi[M // 2] = 0.0
    return np.fft.ifft((1j * xi) ** order * np.fft.fft(values))


def apply_table(table: CoefficientTable, values, L):
    """Pointwise nonlinearity from spectral derivatives, without dealiasing."""
    out = np.zeros_like(values, dtype=complex)
    cache = {}
    for e in table.entries:
        term = np.full_like(values, complex(e.coeff), dtype=complex)
        for a, b in zip(e.alpha, e.conj):
            if (a, b) not in cache:
                d = spectral_derivative(values, L, a)
                cache[a, b] = np.conj(d) if b == "-" else d
            term = term * cache[a, b]
        out += term
    return out


def residual_norm(eq: CoefficientTable, a: AnsatzField, grid, t: float, relative=False) -> float:
    """Discrete L^2 norm of i u_t + (-1)^{j+1} d^{2j} u - F(u) for the ansatz at time t.

    ``grid`` needs ``L``, ``M`` and ``x``.  With ``relative`` the result is
    divided by the norm of F(u).
    """
    j = eq.j
    x = grid.x
    u = a.value(x, t)
    peak = np.max(np.abs(u))
    if peak > 0 and a.kind == "soliton":
        tail = max(abs(u[0]), abs(u[-1]))
        if tail > 1e-12 * peak:
            warnings.warn(f"boundary tail {tail / peak:.3g} of peak; enlarge the box", stacklevel=2)
    lin = 1j * a.time_derivative(x, t) + (-1) ** (j + 1) * spectral_derivative(u, grid.L, 2 * j)
    F = apply_table(eq, u, grid.L)
    dx = grid.L / grid.M
    res = float(np.sqrt(dx * np.sum(np.abs(lin - F) ** 2)))
    if relative:
        scale = float(np.sqrt(dx * np.sum(np.abs(F) ** 2)))
        return res / scale if scale else res
    return res


# torus ill-posedness --------------------------------------------------

@dataclass(frozen=True)
class Separation:
    t_n: float
    norm_at_0: float
    norm_at_tn: float
    norm_at_0_exact: Fraction | None
    norm_at_tn_exact: Fraction | None


def illposedness_separation(j: int, s, n: int, N=1) -> Separation:
    """Plane-wave pair with amplitudes 1 and 1 + 1/n.

    Both norms are <N>^s N^{-s} times 1/n and 2 + 1/n; the exact rational
    factor is returned when <N>^s N^{-s} is rational (in particular s = 0).
    """
    if n < 1 or not N > 0:
        raise ValueError("need n >= 1 and N > 0")
    s_f = float(s)
    w = (1 + float(N) ** 2) ** (s_f / 2) * float(N) ** (-s_f)
    ratio = Fraction(1, n)
    gap = 2 + ratio
    t_n = math.pi * float(N) ** (2 * s_f + 2 - 2 * j) / float((1 + ratio) ** 2 - 1)
    exact = Fraction(s) == 0 if isinstance(s, (int, Fraction)) else s_f == 0.0
    return Separation(t_n, w / n, w * float(gap),
                      ratio if exact else None, gap if exact else None)


def c3_resonant_symbol(k1: int, k2: int, k3: int) -> tuple[Fraction, int]:
    """(n_3, resonance) with n_3 = (k1+k2)^2 + 3/2 (k1+k3)^2 and
    resonance k^4 - k1^4 + k2^4 - k3^4 for k = k1 + k2 + k3."""
    k = k1 + k2 + k3
    n3 = Fraction((k1 + k2) ** 2) + Fraction(3, 2) * (k1 + k3) ** 2
    return n3, k ** 4 - k1 ** 4 + k2 ** 4 - k3 ** 4


def c3_constellations(N: int, N0: int = 1):
    """All (k1, k2, k3) with k1, k3 in {N, N0} and -k2 in {N, N0}, keyed by output frequency."""
    out = {}
    for k1, k2, k3 in product((N, N0), (-N, -N0), (N, N0)):
        out.setdefault(k1 + k2 + k3, []).append((k1, k2, k3))
    return out
