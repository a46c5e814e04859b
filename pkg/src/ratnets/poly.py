"""Sparse homogeneous multivariate polynomials over a pluggable scalar field.

A polynomial is a mapping from exponent tuples (one entry per variable) to
nonzero scalars.  Every stored exponent tuple sums to the polynomial's
degree; the zero polynomial keeps an explicit (nvars, degree) signature so
arithmetic stays well-typed.  The canonical term order is graded
lexicographic, descending, which fixes serialization and coefficient-vector
layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from math import comb
from typing import Iterable, Mapping, Sequence

from .fields import ScalarField, FieldMismatchError

Exponent = tuple[int, ...]


class NotDivisibleError(ArithmeticError):
    """Division by a linear form left a remainder above tolerance."""


def monomials(nvars: int, degree: int) -> list[Exponent]:
    """All exponent tuples of the given total degree, grlex descending."""
    out: list[Exponent] = []

    def rec(prefix: list[int], rem: int, k: int):
        if k == nvars - 1:
            out.append(tuple(prefix + [rem]))
            return
        for e in range(rem, -1, -1):
            rec(prefix + [e], rem - e, k + 1)

    if nvars == 0:
        return [()] if degree == 0 else []
    rec([], degree, 0)
    return out


def monomial_count(nvars: int, degree: int) -> int:
    return comb(nvars + degree - 1, degree)


@dataclass(frozen=True)
class LinearForm:
    """Coefficient vector of a degree-1 form; scalars match some field."""

    coeffs: tuple

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(self.coeffs))

    @property
    def nvars(self) -> int:
        return len(self.coeffs)

    def as_poly(self, field: ScalarField) -> "HomPoly":
        terms = {}
        n = self.nvars
        for j, c in enumerate(self.coeffs):
            if not field.is_zero(c):
                terms[tuple(1 if t == j else 0 for t in range(n))] = c
        return HomPoly(field, n, 1, terms)


@dataclass(frozen=True)
class HomPoly:
    """Homogeneous polynomial: immutable after construction."""

    field: ScalarField
    nvars: int
    degree: int
    terms: Mapping[Exponent, object] = dc_field(default_factory=dict)

    def __post_init__(self):
        cleaned = _cleanup(self.field, self.terms)
        for e in cleaned:
            if len(e) != self.nvars or any(u < 0 for u in e) or sum(e) != self.degree:
                raise ValueError(f"exponent {e} invalid for degree-{self.degree} form in {self.nvars} vars")
        object.__setattr__(self, "terms", cleaned)

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, field: ScalarField, nvars: int, degree: int) -> "HomPoly":
        return cls(field, nvars, degree, {})

    @classmethod
    def constant(cls, field: ScalarField, nvars: int, value) -> "HomPoly":
        return cls(field, nvars, 0, {(0,) * nvars: value})

    @classmethod
    def one(cls, field: ScalarField, nvars: int) -> "HomPoly":
        return cls.constant(field, nvars, field.one())

    @classmethod
    def variable(cls, field: ScalarField, nvars: int, index: int) -> "HomPoly":
        e = tuple(1 if t == index else 0 for t in range(nvars))
        return cls(field, nvars, 1, {e: field.one()})

    @classmethod
    def linear(cls, field: ScalarField, coeffs: Sequence) -> "HomPoly":
        return LinearForm(tuple(coeffs)).as_poly(field)

    # -- inspection --------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def max_magnitude(self) -> float:
        if not self.terms:
            return 0.0
        return max(self.field.magnitude(c) for c in self.terms.values())

    def leading(self) -> tuple[Exponent, object]:
        """Grlex-leading (exponent, coefficient); raises on the zero form."""
        if not self.terms:
            raise ValueError("zero polynomial has no leading term")
        e = max(self.terms)
        return e, self.terms[e]

    def coefficient(self, exponent: Exponent):
        return self.terms.get(tuple(exponent), self.field.zero())

    def coefficient_vector(self) -> list:
        """Dense coefficients over all degree-d monomials, canonical order."""
        z = self.field.zero()
        return [self.terms.get(e, z) for e in monomials(self.nvars, self.degree)]

    def sorted_terms(self) -> list[tuple[Exponent, object]]:
        return sorted(self.terms.items(), key=lambda t: t[0], reverse=True)

    # -- arithmetic --------------------------------------------------------

    def _check_compat(self, other: "HomPoly"):
        if self.nvars != other.nvars:
            raise ValueError(f"variable count mismatch: {self.nvars} vs {other.nvars}")
        if self.field != other.field:
            raise FieldMismatchError(f"{self.field} vs {other.field}")

    def add(self, other: "HomPoly") -> "HomPoly":
        self._check_compat(other)
        if self.degree != other.degree:
            raise ValueError("cannot add forms of different degree")
        f = self.field
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = f.add(out[e], c) if e in out else c
        return HomPoly(f, self.nvars, self.degree, out)

    def sub(self, other: "HomPoly") -> "HomPoly":
        return self.add(other.neg())

    def neg(self) -> "HomPoly":
        f = self.field
        return HomPoly(f, self.nvars, self.degree, {e: f.neg(c) for e, c in self.terms.items()})

    def scale(self, scalar) -> "HomPoly":
        f = self.field
        return HomPoly(f, self.nvars, self.degree, {e: f.mul(scalar, c) for e, c in self.terms.items()})

    def mul(self, other: "HomPoly") -> "HomPoly":
        self._check_compat(other)
        f = self.field
        out: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                v = f.mul(c1, c2)
                out[e] = f.add(out[e], v) if e in out else v
        return HomPoly(f, self.nvars, self.degree + other.degree, out)

    def pow(self, k: int) -> "HomPoly":
        if k < 0:
            raise ValueError("negative power")
        result = HomPoly.one(self.field, self.nvars)
        for _ in range(k):
            result = result.mul(self)
        return result

    def __add__(self, other):
        return self.add(other)

    def __sub__(self, other):
        return self.sub(other)

    def __mul__(self, other):
        return self.mul(other)

    def __neg__(self):
        return self.neg()

    # -- substitution and evaluation ----------------------------------------

    def compose_linear(self, rows: Sequence[Sequence]) -> "HomPoly":
        """Substitute x_i <- rows[i] . y, returning a form in len(rows[0]) vars.

        rows must have one entry per current variable; the invariant is
        evaluate(compose_linear(p, A), y) == evaluate(p, A @ y).
        """
        if len(rows) != self.nvars:
            raise ValueError(f"substitution needs {self.nvars} rows, got {len(rows)}")
        f = self.field
        nout = len(rows[0]) if rows else 0
        if any(len(r) != nout for r in rows):
            raise ValueError("substitution rows have inconsistent lengths")
        forms = [HomPoly.linear(f, r) for r in rows]
        # cache powers of each substituted form
        powers: list[list[HomPoly]] = [[HomPoly.one(f, nout)] for _ in range(self.nvars)]
        out = HomPoly.zero(f, nout, self.degree)
        for e, c in self.terms.items():
            term = HomPoly.constant(f, nout, c)
            for i, u in enumerate(e):
                while len(powers[i]) <= u:
                    powers[i].append(powers[i][-1].mul(forms[i]))
                term = term.mul(powers[i][u])
            out = out.add(term)
        return out

    def evaluate(self, point: Sequence):
        """Sum of coeff * point**exponent over all stored terms."""
        if len(point) != self.nvars:
            raise ValueError(f"point has {len(point)} coordinates, need {self.nvars}")
        f = self.field
        maxu = [0] * self.nvars
        for e in self.terms:
            for i, u in enumerate(e):
                if u > maxu[i]:
                    maxu[i] = u
        powers = []
        for i in range(self.nvars):
            row = [f.one()]
            for _ in range(maxu[i]):
                row.append(f.mul(row[-1], point[i]))
            powers.append(row)
        acc = f.zero()
        for e, c in self.terms.items():
            t = c
            for i, u in enumerate(e):
                if u:
                    t = f.mul(t, powers[i][u])
            acc = f.add(acc, t)
        return acc

    def exact_divide(self, divisor, tol: float = 1e-9) -> "HomPoly":
        """Quotient by a linear form; raises NotDivisibleError on remainder.

        Synthetic division along the divisor's largest-magnitude variable.
        For exact fields the remainder must vanish identically; for float
        fields it must stay below tol relative to the dividend.
        """
        f = self.field
        if isinstance(divisor, LinearForm):
            divisor = divisor.as_poly(f)
        self._check_compat(divisor)
        if divisor.degree != 1:
            raise ValueError("divisor must be a linear form")
        if divisor.is_zero():
            raise ZeroDivisionError("division by the zero form")
        if self.degree < 1:
            raise ValueError("dividend must have degree >= 1")
        coeffs = [divisor.coefficient(tuple(1 if t == i else 0 for t in range(self.nvars)))
                  for i in range(self.nvars)]
        s = max(range(self.nvars), key=lambda i: f.magnitude(coeffs[i]))
        c = coeffs[s]
        rest = {e: v for e, v in divisor.terms.items() if e[s] == 0}
        # group dividend terms by the power of x_s
        by_pow: dict[int, dict] = {}
        for e, v in self.terms.items():
            by_pow.setdefault(e[s], {})[e] = v
        d = self.degree
        quot: dict[Exponent, object] = {}
        carry: dict[Exponent, object] = dict(by_pow.get(d, {}))
        for j in range(d, 0, -1):
            # carry holds the current x_s^j slice of the running remainder
            layer = {}
            for e, v in carry.items():
                q = f.div(v, c)
                eq = list(e)
                eq[s] -= 1
                layer[tuple(eq)] = q
            quot.update(layer)
            nxt = dict(by_pow.get(j - 1, {}))
            for eq, q in layer.items():
                for er, vr in rest.items():
                    e = tuple(a + b for a, b in zip(eq, er))
                    w = f.mul(q, vr)
                    nxt[e] = f.sub(nxt[e], w) if e in nxt else f.neg(w)
            carry = _cleanup(f, nxt)
        rem_mag = max((f.magnitude(v) for v in carry.values()), default=0.0)
        bound = 0.0 if f.exact else tol * max(self.max_magnitude(), 1e-300)
        if rem_mag > bound:
            raise NotDivisibleError(f"remainder magnitude {rem_mag:.3e} exceeds tolerance")
        return HomPoly(f, self.nvars, d - 1, quot)

    # -- serialization -------------------------------------------------------

    def to_json(self) -> dict:
        terms = []
        for e, c in self.sorted_terms():
            entry = {"exp": list(e)}
            entry.update(self.field.coeff_to_json(c))
            terms.append(entry)
        return {"nvars": self.nvars, "degree": self.degree, "terms": terms}

    @classmethod
    def from_json(cls, field: ScalarField, obj: dict) -> "HomPoly":
        terms = {tuple(t["exp"]): field.coeff_from_json(t) for t in obj["terms"]}
        return cls(field, int(obj["nvars"]), int(obj["degree"]), terms)

    def __str__(self):
        if not self.terms:
            return "0"
        bits = []
        for e, c in self.sorted_terms():
            mono = "*".join(f"x{i + 1}^{u}" if u > 1 else f"x{i + 1}"
                            for i, u in enumerate(e) if u)
            bits.append(f"({c})" + (f"*{mono}" if mono else ""))
        return " + ".join(bits)


def _cleanup(field: ScalarField, terms: Mapping) -> dict:
    """Drop exact zeros, then float dust below cleanup_rel * max magnitude."""
    kept = {e: c for e, c in terms.items() if not field.is_zero(c)}
    rel = field.cleanup_rel
    if rel and kept:
        mx = max(field.magnitude(c) for c in kept.values())
        thr = rel * mx
        kept = {e: c for e, c in kept.items() if field.magnitude(c) >= thr}
    return kept


def product(polys: Sequence[HomPoly]) -> HomPoly:
    if not polys:
        raise ValueError("empty product is ambiguous without a signature")
    acc = polys[0]
    for p in polys[1:]:
        acc = acc.mul(p)
    return acc


def deleted_products(polys: Sequence[HomPoly]) -> tuple[list[HomPoly], HomPoly]:
    """For inputs (g_1..g_n): all products with one factor removed, plus the
    full product, via prefix/suffix passes (2n multiplications total)."""
    n = len(polys)
    f = polys[0].field
    nv = polys[0].nvars
    one = HomPoly.one(f, nv)
    pre = [one]
    for p in polys:
        pre.append(pre[-1].mul(p))
    suf = [one] * (n + 1)
    for i in range(n - 1, -1, -1):
        suf[i] = polys[i].mul(suf[i + 1])
    return [pre[i].mul(suf[i + 1]) for i in range(n)], pre[n]


def sym_contract(field: ScalarField, indices: Iterable[int], forms: Sequence) -> HomPoly:
    """Contract the symmetrized basis tensor e_{j1} x ... x e_{jk} against
    forms^(x)k.

    Symmetrization averages over index orderings, and contraction against a
    symmetric power makes every ordering contribute the same product, so the
    result is the plain product of the selected forms (one per index, with
    multiplicity).  ``forms`` may hold LinearForm values or degree-1 HomPoly.
    """
    forms = [f.as_poly(field) if isinstance(f, LinearForm) else f for f in forms]
    idx = list(indices)
    if not idx:
        raise ValueError("empty index multiset")
    m = len(forms)
    for j in idx:
        if not 1 <= j <= m:
            raise IndexError(f"index {j} outside 1..{m}")
    return product([forms[j - 1] for j in idx])
