"""Recursive generation of the NLS/mKdV hierarchy and its structural checks."""

from __future__ import annotations

import json
import os
import threading
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .diffpoly import (
    CONJ, DerivativeSlot, DiffPolynomial, SubstitutionRule, ZERO_POLY, derive_x,
    euler_operator, factor_count, derivative_count, from_json, monomial_order,
    substitute, to_json, to_pretty, var,
)
from .gaussian import I, ONE, GaussianRational

CACHE_ENV = "NLSHIER_CACHE_DIR"
TWO_I = GaussianRational(0, 2)
SYMBOLIC = "symbolic"


class HierarchyError(RuntimeError):
    pass


# recursion ------------------------------------------------------------

class _YCache:
    """Thread-safe memo of Y_n, optionally mirrored to disk."""

    def __init__(self):
        self._lock = threading.RLock()
        self._values = [ZERO_POLY]

    def clear(self):
        with self._lock:
            self._values = [ZERO_POLY]

    def _disk_path(self, n):
        root = os.environ.get(CACHE_ENV)
        return Path(root) / f"Y_{n}.json" if root else None

    def _load(self, n):
        path = self._disk_path(n)
        if path is None or not path.exists():
            return None
        try:
            return from_json(json.loads(path.read_text()))
        except (OSError, ValueError, KeyError):
            return None

    def _store(self, n, p):
        path = self._disk_path(n)
        if path is None:
            return
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(to_json(p), sort_keys=True))
            tmp.replace(path)
        except OSError:
            pass

    def get(self, n):
        with self._lock:
            while len(self._values) <= n:
                m = len(self._values)
                y = self._load(m)
                if y is None:
                    y = _next_Y(self._values)
                    self._store(m, y)
                self._values.append(y)
            return self._values[n]


def _next_Y(ys):
    # Y_{n+1} from Y_0..Y_n
    n = len(ys) - 1
    q, r = var("q"), var("r")
    acc = derive_x(ys[n])
    if n == 0:
        acc = acc - r
    conv = ZERO_POLY
    for k in range(1, n):
        conv = conv + ys[n - k] * ys[k]
    return (acc + q * conv) / TWO_I


_Y = _YCache()


def compute_Y(n: int) -> DiffPolynomial:
    """Y_n from Y_0 = 0 and
    Y_{n+1} = (2i)^{-1} [d_x Y_n - r delta_{0n} + q sum_{k=1}^{n-1} Y_{n-k} Y_k]."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return _Y.get(n)


def clear_cache() -> None:
    _Y.clear()


def conserved_density(n: int) -> DiffPolynomial:
    """Raw integrand q Y_n of the n-th conserved quantity."""
    if n < 1:
        raise ValueError("n must be positive")
    return var("q") * compute_Y(n)


def functional_derivative(density: DiffPolynomial, variable: str) -> DiffPolynomial:
    return euler_operator(density, variable)


# flows ----------------------------------------------------------------

@dataclass(frozen=True)
class FlowSpec:
    """Flow generated by ``alpha * I_{n+1}``.

    ``alpha`` is a concrete Gaussian rational or :data:`SYMBOLIC`, in which
    case equation right-hand sides are reported per unit of alpha.
    """

    n: int
    alpha: GaussianRational | str = SYMBOLIC

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("flow index must be nonnegative")
        if self.alpha != SYMBOLIC:
            a = GaussianRational.coerce(self.alpha)
            object.__setattr__(self, "alpha", a)
            # with q_t = -4i alpha dI/dr and r_t = 4i alpha dI/dq, the reductions
            # r = +-conj(q) survive only for imaginary alpha, whatever the parity of n
            if not a.is_imaginary:
                warnings.warn(f"alpha_{self.n} = {a} is not imaginary; the reduction "
                              "r = +-conj(q) will not be consistent", stacklevel=2)

    @property
    def is_symbolic(self) -> bool:
        return self.alpha == SYMBOLIC

    @property
    def scale(self) -> GaussianRational:
        return ONE if self.is_symbolic else self.alpha


@dataclass(frozen=True)
class EvolutionEquation:
    """``q_t = rhs`` (raw-qr) or ``i u_t + lhs_sign d_x^{2j} u = rhs`` (nls-like).

    For raw flows ``order`` is the dispersion order n and ``j`` is n/2 when
    that is an integer.  ``raw`` keeps the unsubstituted q_t right-hand side;
    ``r_rhs`` is the companion r_t right-hand side when known.
    """

    j: int | None
    lhs_sign: int
    rhs: DiffPolynomial
    form_tag: str
    order: int
    alpha: GaussianRational | str = ONE
    raw: DiffPolynomial | None = None
    r_rhs: DiffPolynomial | None = None

    def pretty(self) -> str:
        if self.form_tag == "nls-like":
            return "i q_t = " + to_pretty(self.raw * I)
        return "q_t = " + flow_text(self.rhs, self.order, self.alpha)


def flow_prefactor(n: int) -> GaussianRational:
    """The scalar -4i (2i)^{-(n+1)} common to every coefficient of flow n."""
    return GaussianRational(0, -4) / TWO_I ** (n + 1)


def flow_text(rhs: DiffPolynomial, n: int, alpha=SYMBOLIC) -> str:
    """Render as ``(c alpha_n)(...)`` with c the common flow prefactor."""
    c = flow_prefactor(n)
    if alpha == SYMBOLIC:
        head = f"({c} alpha_{n})" if c != 1 else f"(alpha_{n})"
        return f"{head}({to_pretty(rhs / c)})"
    c = c * alpha
    return f"({c})({to_pretty(rhs / c)})"


def flow_equation(spec: FlowSpec) -> EvolutionEquation:
    """q_t = -4i alpha dI_{n+1}/dr and r_t = 4i alpha dI_{n+1}/dq."""
    n = spec.n
    dens = conserved_density(n + 1)
    k = GaussianRational(0, 4) * spec.scale
    q_rhs = functional_derivative(dens, "r") * (-k)
    r_rhs = functional_derivative(dens, "q") * k
    return EvolutionEquation(
        j=n // 2 if n % 2 == 0 else None, lhs_sign=(-1) ** (n // 2 + 1),
        rhs=q_rhs, form_tag="raw-qr", order=n, alpha=spec.alpha,
        raw=q_rhs, r_rhs=r_rhs)


def canonical_alpha(j: int) -> GaussianRational:
    """alpha_{2j} = -i 2^{2j-1}."""
    return GaussianRational(0, -(2 ** (2 * j - 1)))


def nls_hierarchy_equation(j: int, rule: SubstitutionRule = CONJ) -> EvolutionEquation:
    """j-th NLS hierarchy equation in the form i u_t + (-1)^{j+1} d^{2j} u = F(u)."""
    if j < 1:
        raise ValueError("j must be positive")
    raw = functional_derivative(conserved_density(2 * j + 1), "r") * (-(2 ** (2 * j + 1)))
    sign = (-1) ** (j + 1)
    u_rhs = substitute(raw, rule)
    # i u_t = i raw; move the dispersive term to the left
    full = u_rhs * I + var("u", 2 * j) * sign
    linear = {k: c for k, c in (u_rhs * I).terms.items() if factor_count(k) == 1}
    expected = {((DerivativeSlot("u", 2 * j), 1),): GaussianRational(-sign)}
    if linear != expected:
        raise HierarchyError(f"linear part of equation j={j} is {linear}, expected {expected}")
    return EvolutionEquation(j=j, lhs_sign=sign, rhs=full, form_tag="nls-like",
                             order=2 * j, alpha=canonical_alpha(j), raw=raw)


# structure ------------------------------------------------------------

@dataclass
class StructureReport:
    n: int
    checks: dict = field(default_factory=dict)
    counterexamples: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def validate_Y_structure(n: int) -> StructureReport:
    y = compute_Y(n)
    rep = StructureReport(n)
    scale = TWO_I ** n

    def check(name, pred):
        bad = next((k for k in y.terms if not pred(k, y.terms[k])), None)
        rep.checks[name] = bad is None
        if bad is not None:
            rep.counterexamples[name] = str(DiffPolynomial({bad: y.terms[bad]}))

    check("polynomial", lambda k, c: len(k) > 0 and all(s.variable in ("q", "r") for s, _ in k))
    check("homogeneity", lambda k, c: monomial_order(k) == n)
    check("r-count", lambda k, c: factor_count(k, "r") == factor_count(k, "q") + 1)
    check("coefficient-lattice", lambda k, c: (c * scale).is_real and (c * scale).is_integer)
    singles = {k: c for k, c in y.terms.items() if factor_count(k) == 1}
    lead = {((DerivativeSlot("r", n - 1), 1),): -(ONE / scale)}
    rep.checks["leading-term"] = singles == lead
    if singles != lead:
        rep.counterexamples["leading-term"] = str(DiffPolynomial(singles))
    return rep


# coefficient tables ---------------------------------------------------

@dataclass(frozen=True)
class TableEntry:
    k: int
    alpha: tuple
    conj: tuple
    coeff: GaussianRational

    def monomial(self) -> DiffPolynomial:
        powers = {}
        for a, b in zip(self.alpha, self.conj):
            s = DerivativeSlot("u" if b == "+" else "ubar", a)
            powers[s] = powers.get(s, 0) + 1
        return DiffPolynomial.monomial(powers, self.coeff)

    @property
    def degree(self) -> int:
        return 2 * self.k + 1

    def to_json(self) -> dict:
        c = self.coeff
        return {"k": self.k, "alpha": list(self.alpha), "conj": list(self.conj),
                "coeff": {"re": [c.re.numerator, c.re.denominator],
                          "im": [c.im.numerator, c.im.denominator]}}

    @classmethod
    def from_json(cls, d: dict) -> "TableEntry":
        c = d["coeff"]
        coeff = GaussianRational(Fraction(*c["re"]), Fraction(*c["im"]))
        return cls(int(d["k"]), tuple(int(a) for a in d["alpha"]), tuple(d["conj"]), coeff)


class NotNLSLike(ValueError):
    pass


def _layout(key) -> tuple[tuple, tuple]:
    ups = sorted((s.order for s, m in key if s.variable == "u" for _ in range(m)), reverse=True)
    downs = sorted((s.order for s, m in key if s.variable == "ubar" for _ in range(m)), reverse=True)
    if len(ups) == len(downs) + 1:
        alpha, conj = [], []
        for i, a in enumerate(ups):
            alpha.append(a)
            conj.append("+")
            if i < len(downs):
                alpha.append(downs[i])
                conj.append("-")
        return tuple(alpha), tuple(conj)
    return tuple(ups + downs), tuple("+" * len(ups) + "-" * len(downs))


@dataclass(frozen=True)
class CoefficientTable:
    """Nonlinearity sum c_{k,alpha,b} prod d^{alpha_l} u_{b_l} of an NLS-like equation."""

    j: int
    entries: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(sorted(
            self.entries, key=lambda e: (e.k, e.conj, tuple(-a for a in e.alpha)))))
        for e in self.entries:
            if not 1 <= e.k <= self.j or len(e.alpha) != 2 * e.k + 1 \
                    or len(e.conj) != len(e.alpha) or sum(e.alpha) != 2 * (self.j - e.k):
                raise NotNLSLike(f"entry {e} is not admissible for j={self.j}")

    @property
    def max_degree(self) -> int:
        return max((e.degree for e in self.entries), default=1)

    def to_polynomial(self) -> DiffPolynomial:
        p = ZERO_POLY
        for e in self.entries:
            p = p + e.monomial()
        return p

    def to_json(self) -> dict:
        return {"j": self.j, "entries": [e.to_json() for e in self.entries]}

    @classmethod
    def from_json(cls, d: dict) -> "CoefficientTable":
        return cls(int(d["j"]), tuple(TableEntry.from_json(e) for e in d["entries"]))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_polynomial(cls, j: int, p: DiffPolynomial) -> "CoefficientTable":
        entries = []
        for key, c in p.terms.items():
            if any(s.variable not in ("u", "ubar") for s, _ in key):
                raise NotNLSLike("nonlinearity must be written in u and ubar")
            nf = factor_count(key)
            if nf % 2 == 0:
                raise NotNLSLike(f"monomial {DiffPolynomial({key: c})} has an even factor count")
            k = (nf - 1) // 2
            if not 1 <= k <= j or derivative_count(key) != 2 * (j - k):
                raise NotNLSLike(f"monomial {DiffPolynomial({key: c})} violates |alpha| = 2(j-k)")
            alpha, conj = _layout(key)
            entries.append(TableEntry(k, alpha, conj, c))
        return cls(j, tuple(entries))

    def is_nls_pattern(self) -> bool:
        """Every entry has k+1 factors u and k factors ubar and integer coefficient."""
        return all(e.conj.count("-") == e.k and e.coeff.is_integer for e in self.entries)


def extract_coefficients(eq: EvolutionEquation) -> CoefficientTable:
    if eq.form_tag != "nls-like" or eq.j is None:
        raise NotNLSLike("equation is not in nls-like form")
    return CoefficientTable.from_polynomial(eq.j, eq.rhs)


def critical_regularity(j: int, r: float) -> float:
    """Scaling-critical s for the Fourier-Lebesgue scale; -1/r' for every j."""
    if not r > 1:
        raise ValueError("r must exceed 1")
    return -1.0 if r == float("inf") else -(1.0 - 1.0 / r)
