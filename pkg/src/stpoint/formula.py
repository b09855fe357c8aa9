"""Model formula mini-language.

Formulas describe log-linear trends: ``~ x + y:t + I(x^2*y)``.  Terms are
joined by ``+``, interaction factors by ``:``, and ``I(...)`` wraps
monomials with integer powers >= 1.  An intercept is always included.
Variables resolve to coordinates (x, y, t), mark columns, or covariate
grids; categorical marks expand to treatment-coded indicator columns with
the lexicographically first level as reference.

Grammar::

    formula  := "~" expr
    expr     := term ("+" term)*
    term     := factor (":" factor)*
    factor   := ident | "1" | "I(" monomial ")"
    monomial := primary ("*" primary)*
    primary  := ident ("^" int)?

Smooth terms ``s(...)`` are recognised and rejected explicitly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .covariates import CovariateGrid, lookup_nearest

__all__ = [
    "FormulaError",
    "Factor",
    "Term",
    "Formula",
    "parse_formula",
    "DesignMatrix",
    "build_design",
]


class FormulaError(ValueError):
    """Formula syntax or semantics error; carries the byte offset."""

    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (byte {offset})"
        super().__init__(message)


@dataclass(frozen=True)
class Factor:
    """One interaction factor: a variable or an I() monomial."""

    kind: str  # "var" | "poly"
    powers: Tuple[Tuple[str, int], ...]

    def key(self):
        merged = {}
        for name, p in self.powers:
            merged[name] = merged.get(name, 0) + p
        return (self.kind, tuple(sorted(merged.items())))

    def __str__(self):
        if self.kind == "var":
            return self.powers[0][0]
        parts = [n if p == 1 else f"{n}^{p}" for n, p in self.powers]
        return "I(" + "*".join(parts) + ")"


@dataclass(frozen=True)
class Term:
    factors: Tuple[Factor, ...]

    def key(self):
        return tuple(sorted(f.key() for f in self.factors))

    def __str__(self):
        return ":".join(str(f) for f in self.factors)


@dataclass(frozen=True)
class Formula:
    """Parsed formula: a tuple of non-intercept terms (intercept implicit)."""

    terms: Tuple[Term, ...]

    def variables(self) -> Tuple[str, ...]:
        seen = []
        for term in self.terms:
            for f in term.factors:
                for name, _ in f.powers:
                    if name not in seen:
                        seen.append(name)
        return tuple(seen)

    def __str__(self):
        if not self.terms:
            return "~1"
        return "~" + " + ".join(str(t) for t in self.terms)


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
  | (?P<int>\d+)
  | (?P<op>[~+:*^()])
    """,
    re.VERBOSE,
)


def _tokenize(src: str):
    pos = 0
    out = []
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise FormulaError(f"unexpected character {src[pos]!r}", pos)
        if m.lastgroup != "ws":
            out.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    out.append(("end", "", len(src)))
    return out


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None, value=None):
        tok = self.toks[self.i]
        if kind is not None and tok[0] != kind:
            raise FormulaError(
                f"expected {kind}, found {tok[1] or 'end of formula'!r}", tok[2]
            )
        if value is not None and tok[1] != value:
            raise FormulaError(
                f"expected {value!r}, found {tok[1] or 'end of formula'!r}", tok[2]
            )
        self.i += 1
        return tok

    def parse(self) -> Formula:
        self.take("op", "~")
        terms = [self.term()]
        while self.peek()[1] == "+":
            self.take()
            terms.append(self.term())
        tok = self.peek()
        if tok[0] != "end":
            raise FormulaError(f"unexpected {tok[1]!r}", tok[2])
        out = []
        seen = set()
        for t in terms:
            if t is None:  # bare intercept token
                continue
            k = t.key()
            if k not in seen:
                seen.add(k)
                out.append(t)
        return Formula(tuple(out))

    def term(self) -> Optional[Term]:
        factors = [self.factor()]
        while self.peek()[1] == ":":
            self.take()
            factors.append(self.factor())
        factors = [f for f in factors if f is not None]
        if not factors:
            return None
        return Term(tuple(factors))

    def factor(self) -> Optional[Factor]:
        tok = self.peek()
        if tok[0] == "int":
            if tok[1] == "1":
                self.take()
                return None  # explicit intercept
            raise FormulaError(f"unexpected number {tok[1]!r}", tok[2])
        if tok[0] != "ident":
            raise FormulaError(
                f"expected a variable, found {tok[1] or 'end of formula'!r}", tok[2]
            )
        name = tok[1]
        self.take()
        if self.peek()[1] == "(":
            if name == "I":
                return self.i_expr(tok[2])
            if name == "s":
                raise FormulaError("unsupported: smooth terms", tok[2])
            raise FormulaError(f"unknown function {name!r}", tok[2])
        return Factor("var", ((name, 1),))

    def i_expr(self, start: int) -> Factor:
        self.take("op", "(")
        powers = [self.primary()]
        while self.peek()[1] == "*":
            self.take()
            powers.append(self.primary())
        self.take("op", ")")
        return Factor("poly", tuple(powers))

    def primary(self) -> Tuple[str, int]:
        tok = self.take("ident")
        power = 1
        if self.peek()[1] == "^":
            self.take()
            ptok = self.take("int")
            power = int(ptok[1])
            if power < 1:
                raise FormulaError("powers must be integers >= 1", ptok[2])
        return (tok[1], power)


def parse_formula(source) -> Formula:
    """Parse a formula string; passes a Formula through unchanged."""
    if isinstance(source, Formula):
        return source
    return _Parser(str(source)).parse()


@dataclass(frozen=True)
class DesignMatrix:
    names: Tuple[str, ...]
    matrix: np.ndarray


def _resolve(name, coords, marks, covs):
    """Columns for one variable: [(suffix, values, is_reference_ok)]."""
    if name == "x":
        return [("x", coords[:, 0])], "continuous"
    if name == "y":
        return [("y", coords[:, 1])], "continuous"
    if name == "t":
        return [("t", coords[:, 2])], "continuous"
    if marks and name in marks:
        col = marks[name]
        if col.kind == "continuous":
            return [(name, col.values)], "continuous"
        cols = [
            (f"{name}{level}", (col.values == i).astype(float))
            for i, level in enumerate(col.levels)
        ]
        return cols[1:], "categorical"  # first level is the reference
    if covs and name in covs:
        grid = covs[name]
        vals = lookup_nearest(grid, coords[:, 0], coords[:, 1], coords[:, 2])
        return [(name, vals)], "continuous"
    raise FormulaError(f"unknown variable {name!r}")


def build_design(formula, coords, marks=None, covs=None) -> DesignMatrix:
    """Design matrix for a formula at the given points.

    ``coords`` is (n, 3); ``marks`` maps names to MarkColumn; ``covs`` maps
    names to CovariateGrid.  The first column is the intercept.
    """
    formula = parse_formula(formula)
    coords = np.asarray(coords, dtype=float)
    n = len(coords)
    names = ["(Intercept)"]
    cols = [np.ones(n)]
    for term in formula.terms:
        pieces = []  # per factor: list of (suffix, column)
        for f in term.factors:
            if f.kind == "poly":
                col = np.ones(n)
                for vname, p in f.powers:
                    resolved, kind = _resolve(vname, coords, marks, covs)
                    if kind != "continuous":
                        raise FormulaError(
                            f"categorical mark {vname!r} not allowed inside I()"
                        )
                    col = col * resolved[0][1] ** p
                pieces.append([(str(f), col)])
            else:
                resolved, _kind = _resolve(f.powers[0][0], coords, marks, covs)
                pieces.append([(suffix, vals) for suffix, vals in resolved])
        expanded = [("", np.ones(n))]
        for piece in pieces:
            expanded = [
                (f"{nm}:{suffix}" if nm else suffix, vals * col)
                for nm, vals in expanded
                for suffix, col in piece
            ]
        for nm, col in expanded:
            names.append(nm)
            cols.append(col)
    return DesignMatrix(tuple(names), np.column_stack(cols))
