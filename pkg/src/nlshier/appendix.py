"""Reference table of the first conserved densities and flows, read from package data."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from .diffpoly import DiffPolynomial, parse_polynomial
from .gaussian import GaussianRational, parse_coefficient

TWO_I = GaussianRational(0, 2)


@dataclass(frozen=True)
class Erratum:
    kind: str
    n: int
    field: str
    old: str
    new: str
    reason: str


@dataclass(frozen=True)
class ReferenceLine:
    kind: str  # "density" or "flow"
    n: int
    scale: GaussianRational
    body: DiffPolynomial
    corrected: bool = False

    @property
    def value(self) -> DiffPolynomial:
        """Density integrand including (2i)^{-n}, or flow rhs per unit alpha."""
        if self.kind == "density":
            return self.body * (self.scale / TWO_I ** self.n)
        return self.body * self.scale


def _rows(name):
    text = resources.files("nlshier.data").joinpath(name).read_text()
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        head, *rest = [p.strip() for p in line.split("|")]
        kind, n = head.split()
        yield kind, int(n), rest


def errata() -> list[Erratum]:
    return [Erratum(kind, n, *rest) for kind, n, rest in _rows("appendix_errata.txt")]


def load(corrected: bool = True) -> dict[tuple[str, int], ReferenceLine]:
    """All reference lines keyed by ``(kind, n)``; ``corrected`` applies the errata."""
    out = {}
    for kind, n, (scale, body) in _rows("appendix.txt"):
        out[kind, n] = ReferenceLine(kind, n, parse_coefficient(scale), parse_polynomial(body))
    if corrected:
        for e in errata():
            line = out[e.kind, e.n]
            if e.field == "prefactor":
                if line.scale != parse_coefficient(e.old):
                    raise ValueError(f"erratum does not match {e.kind} {e.n}")
                out[e.kind, e.n] = ReferenceLine(e.kind, e.n, parse_coefficient(e.new), line.body, True)
            else:
                old, new = parse_polynomial(e.old), parse_polynomial(e.new)
                (key, c), = old.terms.items()
                if line.body.coefficient(key) != c:
                    raise ValueError(f"erratum does not match {e.kind} {e.n}")
                out[e.kind, e.n] = ReferenceLine(e.kind, e.n, line.scale,
                                                 line.body - old + new, True)
    return out
