"""Differential polynomials in two dependent variables and their x-derivatives.

A polynomial is a finite sum of monomials ``c * prod (d_x^k v)^m`` with
Gaussian-rational ``c``.  The raw hierarchy lives in the alphabet ``{q, r}``;
after the identification ``r = conj(q)`` expressions live in ``{u, ubar}``.
Both alphabets share this one implementation.

Everything here is immutable and exact.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, NamedTuple

from .gaussian import ONE, ZERO, GaussianRational, Number, parse_coefficient, format_coefficient

VARIABLES = ("q", "r", "u", "ubar")
CONJUGATE_VARIABLE = {"u": "ubar", "ubar": "u"}


class DerivativeSlot(NamedTuple):
    """``(variable, order)``: ``order`` x-derivatives of ``variable``."""

    variable: str
    order: int = 0

    def raised(self, by: int = 1) -> "DerivativeSlot":
        return DerivativeSlot(self.variable, self.order + by)

    def __str__(self) -> str:
        return self.variable if self.order == 0 else f"{self.variable}_{'x' * self.order}"


Key = tuple  # tuple[tuple[DerivativeSlot, int], ...], sorted by slot


def _make_key(powers: Mapping[DerivativeSlot, int]) -> Key:
    for slot, mult in powers.items():
        if slot.variable not in VARIABLES or slot.order < 0:
            raise ValueError(f"invalid slot {slot!r}")
        if mult < 0:
            raise ValueError(f"negative multiplicity for {slot}")
    return tuple(sorted((DerivativeSlot(*s), m) for s, m in powers.items() if m))


def _mul_keys(a: Key, b: Key) -> Key:
    if not a:
        return b
    if not b:
        return a
    merged = dict(a)
    for slot, m in b:
        merged[slot] = merged.get(slot, 0) + m
    return tuple(sorted(merged.items()))


def monomial_order(key: Key) -> int:
    """Number of factors plus number of derivatives."""
    return sum(m * (1 + s.order) for s, m in key)


def factor_count(key: Key, variable: str | None = None) -> int:
    return sum(m for s, m in key if variable is None or s.variable == variable)


def derivative_count(key: Key) -> int:
    return sum(m * s.order for s, m in key)


@dataclass(frozen=True)
class DiffMonomial:
    coeff: GaussianRational
    powers: Key

    @property
    def order(self) -> int:
        return monomial_order(self.powers)


class DiffPolynomial:
    """Canonical sum of differential monomials.

    Terms are stored keyed by their sorted ``(slot, multiplicity)`` tuple; no
    zero coefficients survive construction.
    """

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[Key, Number] | Iterable[tuple[Key, Number]] = ()):
        acc: dict[Key, GaussianRational] = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for key, c in items:
            key = _make_key(dict(key)) if not _is_canonical(key) else tuple(key)
            c = GaussianRational.coerce(c)
            acc[key] = acc.get(key, ZERO) + c
        self._terms = MappingProxyType({k: v for k, v in sorted(acc.items()) if v})
        self._hash = None

    # construction -----------------------------------------------------
    @classmethod
    def constant(cls, c: Number) -> "DiffPolynomial":
        return cls({(): c})

    @classmethod
    def slot(cls, variable: str, order: int = 0, power: int = 1,
             coeff: Number = 1) -> "DiffPolynomial":
        return cls({_make_key({DerivativeSlot(variable, order): power}): coeff})

    @classmethod
    def monomial(cls, powers: Mapping[DerivativeSlot, int], coeff: Number = 1) -> "DiffPolynomial":
        return cls({_make_key(powers): coeff})

    @classmethod
    def _raw(cls, terms: dict[Key, GaussianRational]) -> "DiffPolynomial":
        obj = cls.__new__(cls)
        obj._terms = MappingProxyType({k: v for k, v in sorted(terms.items()) if v})
        obj._hash = None
        return obj

    # access -----------------------------------------------------------
    @property
    def terms(self) -> Mapping[Key, GaussianRational]:
        return self._terms

    def monomials(self) -> Iterator[DiffMonomial]:
        for k, c in self._terms.items():
            yield DiffMonomial(c, k)

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, DiffPolynomial):
            return self._terms == other._terms
        if isinstance(other, (int, GaussianRational)):
            return self == DiffPolynomial.constant(other)
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def coefficient(self, powers: Mapping[DerivativeSlot, int] | Key) -> GaussianRational:
        key = _make_key(dict(powers)) if isinstance(powers, Mapping) else tuple(powers)
        return self._terms.get(key, ZERO)

    def variables(self) -> set[str]:
        return {s.variable for k in self._terms for s, _ in k}

    def max_order(self, variable: str) -> int:
        """Highest derivative order of ``variable`` present, or -1."""
        return max((s.order for k in self._terms for s, _ in k if s.variable == variable),
                   default=-1)

    # ring operations --------------------------------------------------
    def __add__(self, other: "DiffPolynomial | Number") -> "DiffPolynomial":
        other = _as_poly(other)
        acc = dict(self._terms)
        for k, c in other._terms.items():
            acc[k] = acc.get(k, ZERO) + c
        return DiffPolynomial._raw(acc)

    __radd__ = __add__

    def __neg__(self) -> "DiffPolynomial":
        return DiffPolynomial._raw({k: -c for k, c in self._terms.items()})

    def __sub__(self, other: "DiffPolynomial | Number") -> "DiffPolynomial":
        return self + (-_as_poly(other))

    def __rsub__(self, other: "DiffPolynomial | Number") -> "DiffPolynomial":
        return _as_poly(other) - self

    def __mul__(self, other: "DiffPolynomial | Number") -> "DiffPolynomial":
        if not isinstance(other, DiffPolynomial):
            c = GaussianRational.coerce(other)
            return DiffPolynomial._raw({k: v * c for k, v in self._terms.items()})
        acc: dict[Key, GaussianRational] = {}
        for ka, ca in self._terms.items():
            for kb, cb in other._terms.items():
                k = _mul_keys(ka, kb)
                acc[k] = acc.get(k, ZERO) + ca * cb
        return DiffPolynomial._raw(acc)

    __rmul__ = __mul__

    def __truediv__(self, c: Number) -> "DiffPolynomial":
        c = GaussianRational.coerce(c)
        return DiffPolynomial._raw({k: v / c for k, v in self._terms.items()})

    def __pow__(self, n: int) -> "DiffPolynomial":
        result = DiffPolynomial.constant(1)
        for _ in range(n):
            result = result * self
        return result

    def conjugate(self) -> "DiffPolynomial":
        """Complex conjugate in the ``{u, ubar}`` alphabet."""
        acc: dict[Key, GaussianRational] = {}
        for k, c in self._terms.items():
            swapped = {}
            for s, m in k:
                if s.variable not in CONJUGATE_VARIABLE:
                    raise ValueError("conjugation needs the {u, ubar} alphabet")
                swapped[DerivativeSlot(CONJUGATE_VARIABLE[s.variable], s.order)] = m
            acc[_make_key(swapped)] = c.conjugate()
        return DiffPolynomial._raw(acc)

    def __str__(self) -> str:
        return to_text(self)

    def __repr__(self) -> str:
        return f"DiffPolynomial({to_text(self)!r})"


def _is_canonical(key) -> bool:
    return isinstance(key, tuple) and all(
        isinstance(e, tuple) and len(e) == 2 and isinstance(e[0], DerivativeSlot) for e in key
    ) and list(key) == sorted(key)


def _as_poly(x) -> DiffPolynomial:
    return x if isinstance(x, DiffPolynomial) else DiffPolynomial.constant(x)


ZERO_POLY = DiffPolynomial()


def var(name: str, order: int = 0) -> DiffPolynomial:
    """Shorthand: ``var('q', 2)`` is ``q_xx``."""
    return DiffPolynomial.slot(name, order)


# calculus -------------------------------------------------------------

def add(a: DiffPolynomial, b: DiffPolynomial) -> DiffPolynomial:
    return a + b


def mul(a: DiffPolynomial, b: DiffPolynomial) -> DiffPolynomial:
    return a * b


def derive_x(p: DiffPolynomial, times: int = 1) -> DiffPolynomial:
    """Total x-derivative by the Leibniz rule."""
    for _ in range(times):
        acc: dict[Key, GaussianRational] = {}
        for key, c in p.terms.items():
            for i, (slot, m) in enumerate(key):
                powers = dict(key)
                powers[slot] = m - 1
                up = slot.raised()
                powers[up] = powers.get(up, 0) + 1
                k = _make_key(powers)
                acc[k] = acc.get(k, ZERO) + c * m
        p = DiffPolynomial._raw(acc)
    return p


def partial_wrt(p: DiffPolynomial, slot: DerivativeSlot | tuple[str, int]) -> DiffPolynomial:
    """Formal partial derivative treating every slot as an independent variable."""
    slot = DerivativeSlot(*slot)
    acc: dict[Key, GaussianRational] = {}
    for key, c in p.terms.items():
        powers = dict(key)
        m = powers.get(slot, 0)
        if not m:
            continue
        powers[slot] = m - 1
        acc[_make_key(powers)] = acc.get(_make_key(powers), ZERO) + c * m
    return DiffPolynomial._raw(acc)


def euler_operator(p: DiffPolynomial, variable: str) -> DiffPolynomial:
    """``sum_k (-1)^k d_x^k (df / d(d_x^k variable))``."""
    result = ZERO_POLY
    for k in range(p.max_order(variable) + 1):
        term = derive_x(partial_wrt(p, DerivativeSlot(variable, k)), k)
        result = result + (term if k % 2 == 0 else -term)
    return result


def is_total_derivative(p: DiffPolynomial) -> bool:
    """Whether ``p`` is ``d_x`` of some differential polynomial.

    For polynomials without explicit x-dependence this holds exactly when the
    constant term vanishes and every Euler operator annihilates ``p``.
    """
    if p.coefficient(()):
        return False
    return all(not euler_operator(p, v) for v in p.variables())


# substitution ---------------------------------------------------------

@dataclass(frozen=True)
class SubstitutionRule:
    """How to eliminate ``r``.

    ``kind`` is one of ``"conj"`` (r = conj q), ``"neg_conj"`` (r = -conj q),
    ``"q"`` (r = q), ``"constant"`` (r = value).
    """

    kind: str
    value: GaussianRational = ZERO

    def __post_init__(self) -> None:
        if self.kind not in ("conj", "neg_conj", "q", "constant"):
            raise ValueError(f"unknown substitution {self.kind!r}")
        object.__setattr__(self, "value", GaussianRational.coerce(self.value))

    @classmethod
    def parse(cls, text: str) -> "SubstitutionRule":
        text = text.strip()
        if text in ("conj", "+conj"):
            return cls("conj")
        if text in ("-conj", "neg_conj"):
            return cls("neg_conj")
        if text == "q":
            return cls("q")
        return cls("constant", parse_coefficient(text))

    def __str__(self) -> str:
        return {"conj": "r -> conj(q)", "neg_conj": "r -> -conj(q)", "q": "r -> q"}.get(
            self.kind, f"r -> {self.value}")


CONJ = SubstitutionRule("conj")
NEG_CONJ = SubstitutionRule("neg_conj")


def substitute(p: DiffPolynomial, rule: SubstitutionRule) -> DiffPolynomial:
    """Eliminate ``r`` from a ``{q, r}`` polynomial.

    Conjugation rules move the result into the ``{u, ubar}`` alphabet; d_x
    commutes with conjugation, so ``r_k`` becomes ``+-ubar_k``.
    """
    result = ZERO_POLY
    for key, c in p.terms.items():
        term = DiffPolynomial.constant(c)
        for slot, m in key:
            if slot.variable not in ("q", "r"):
                raise ValueError("substitute expects a {q, r} polynomial")
            if slot.variable == "q":
                target = var("u", slot.order) if rule.kind in ("conj", "neg_conj") else var("q", slot.order)
            elif rule.kind == "conj":
                target = var("ubar", slot.order)
            elif rule.kind == "neg_conj":
                target = -var("ubar", slot.order)
            elif rule.kind == "q":
                target = var("q", slot.order)
            else:
                target = DiffPolynomial.constant(rule.value if slot.order == 0 else 0)
            term = term * target ** m
        result = result + term
    return result


# text form ------------------------------------------------------------

def _factor_text(slot: DerivativeSlot, mult: int) -> str:
    return str(slot) if mult == 1 else f"{slot}^{mult}"


def _term_sort_key(item):
    key, _ = item
    return (factor_count(key), key)


def to_text(p: DiffPolynomial) -> str:
    """Stable text form, e.g. ``(-1/8 i) * q * r_xx + (1) * q^2 * r^2``."""
    if not p:
        return "0"
    parts = []
    for key, c in sorted(p.terms.items(), key=_term_sort_key):
        factors = [f"({format_coefficient(c)})"] + [_factor_text(s, m) for s, m in key]
        parts.append(" * ".join(factors))
    return " + ".join(parts)


def to_pretty(p: DiffPolynomial) -> str:
    """Compact rendering used for equations, e.g. ``-q_xx + 2 q^2 r``."""
    if not p:
        return "0"
    out = []
    for key, c in sorted(p.terms.items(), key=_term_sort_key):
        factors = " ".join(_factor_text(s, m) for s, m in key)
        if c.is_real:
            mag = abs(c.re)
            sign = "-" if c.re < 0 else "+"
            cs = "" if mag == 1 and factors else format_coefficient(GaussianRational(mag))
        else:
            sign, cs = "+", f"({format_coefficient(c)})"
        body = " ".join(x for x in (cs, factors) if x)
        out.append((sign, body))
    first_sign, first = out[0]
    text = ("-" if first_sign == "-" else "") + first
    for sign, body in out[1:]:
        text += f" {sign} {body}"
    return text


_FACTOR_RE = re.compile(r"^(ubar|u|q|r)(?:_(x+))?(?:\^(\d+))?$")


def _split_top(text: str) -> list[tuple[str, str]]:
    """Split on top-level + and - into (sign, body) pairs."""
    parts, depth, cur, sign = [], 0, "", "+"
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if depth == 0 and ch in "+-" and (cur.strip() or i == 0) and not cur.rstrip().endswith("^"):
            if cur.strip():
                parts.append((sign, cur))
            sign, cur = ch, ""
            continue
        cur += ch
    if cur.strip():
        parts.append((sign, cur))
    return parts


def parse_polynomial(text: str) -> DiffPolynomial:
    """Parse both :func:`to_text` output and the handwritten form ``8 q q_xx r``."""
    text = text.strip()
    if text in ("", "0"):
        return ZERO_POLY
    result: dict[Key, GaussianRational] = {}
    for sign, body in _split_top(text):
        coeff = ONE
        powers: dict[DerivativeSlot, int] = {}
        tokens = re.findall(r"\([^()]*\)|[^\s*()]+", body)
        if not tokens:
            raise ValueError(f"empty term in {text!r}")
        for tok in tokens:
            if tok.startswith("("):
                coeff = coeff * parse_coefficient(tok[1:-1])
                continue
            m = _FACTOR_RE.match(tok)
            if m:
                slot = DerivativeSlot(m.group(1), len(m.group(2) or ""))
                powers[slot] = powers.get(slot, 0) + int(m.group(3) or 1)
            else:
                coeff = coeff * parse_coefficient(tok)
        if sign == "-":
            coeff = -coeff
        k = _make_key(powers)
        result[k] = result.get(k, ZERO) + coeff
    return DiffPolynomial._raw(result)


# JSON form ------------------------------------------------------------

def to_json(p: DiffPolynomial) -> dict:
    return {"terms": [
        {"coeff": c.to_json(), "powers": [[s.variable, s.order, m] for s, m in key]}
        for key, c in sorted(p.terms.items(), key=_term_sort_key)
    ]}


def from_json(data: dict) -> DiffPolynomial:
    terms = []
    for t in data["terms"]:
        powers = {DerivativeSlot(v, int(o)): int(m) for v, o, m in t["powers"]}
        terms.append((_make_key(powers), GaussianRational.from_json(t["coeff"])))
    return DiffPolynomial(terms)
