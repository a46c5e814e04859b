"""Parameter recovery from output tuples, with membership verdicts.

Shallow route: factor the denominator into linear forms (rows of the first
matrix), then solve one least-squares system per numerator for the second
matrix.  Deep binary route: peel one layer at a time by factoring the
appropriate binary form, substituting the two chosen factor directions to
canonical coordinates, and recursing; the base case is an explicit quadratic
split.  Recovered weights are only ever compared through the forward map,
never entrywise, since permutation and diagonal reparametrizations leave the
function unchanged.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fields import COMPLEX
from .poly import HomPoly, LinearForm, NotDivisibleError, monomials, deleted_products
from .network import Architecture, Weights, RationalTuple, degrees, forward_recursive
from .factor import (NonConvergenceError, factor_binary_form,
                     factor_multilinear, factor_quadratic_explicit)

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PROPORTIONAL_TOL = 1e-7


class Stage(enum.Enum):
    NONE = "None"
    DEGREE_TEST = "DegreeTest"
    FACTOR_TEST = "FactorTest"
    SPAN_TEST = "SpanTest"
    REPEATED_FACTORS = "RepeatedFactors"
    VERIFICATION_FAIL = "VerificationFail"


@dataclass
class MembershipVerdict:
    in_model: bool
    stage_failed: Stage
    weights: Weights | None
    residual: float
    necessary_only: bool = False

    def to_json(self) -> dict:
        obj = {"in_model": self.in_model, "stage_failed": self.stage_failed.value,
               "residual": self.residual, "necessary_only": self.necessary_only}
        if self.weights is not None:
            obj["weights"] = self.weights.to_json()
        return obj


class ReconstructionError(RuntimeError):
    def __init__(self, verdict: MembershipVerdict):
        super().__init__(f"reconstruction failed at stage {verdict.stage_failed.value}")
        self.verdict = verdict


def _to_complex_poly(p: HomPoly) -> HomPoly:
    if p.field == COMPLEX:
        return p
    return HomPoly(COMPLEX, p.nvars, p.degree,
                   {e: p.field.to_complex(c) for e, c in p.terms.items()})


def _tuple_to_complex(t: RationalTuple) -> RationalTuple:
    return RationalTuple(tuple(_to_complex_poly(p) for p in t.numerators),
                         _to_complex_poly(t.denominator))


def projective_normalize(t: RationalTuple) -> RationalTuple:
    """Scale the tuple so the denominator's grlex-leading coefficient is 1,
    falling back to its largest-magnitude coefficient when that slot is
    (numerically) empty."""
    t = _tuple_to_complex(t)
    q = t.denominator
    if q.is_zero():
        raise ValueError("denominator is identically zero")
    lead_exp = monomials(q.nvars, q.degree)[0]
    pivot = complex(q.coefficient(lead_exp))
    mx = q.max_magnitude()
    if abs(pivot) <= 1e-12 * mx:
        pivot = max(q.terms.values(), key=lambda c: abs(complex(c)))
    s = 1.0 / complex(pivot)
    return RationalTuple(tuple(p.scale(s) for p in t.numerators), q.scale(s))


def projective_mismatch(a: RationalTuple, b: RationalTuple) -> float:
    """Max coefficient deviation between the normalized tuples, relative to
    the first tuple's largest coefficient magnitude."""
    a, b = projective_normalize(a), projective_normalize(b)
    if len(a.numerators) != len(b.numerators):
        raise ValueError("tuples have different output counts")
    scale = max(p.max_magnitude() for p in a.all_polys())
    err = 0.0
    for pa, pb in zip(a.all_polys(), b.all_polys()):
        for e in set(pa.terms) | set(pb.terms):
            err = max(err, abs(complex(pa.coefficient(e)) - complex(pb.coefficient(e))))
    return err / scale if scale else err


def _fail(stage: Stage, residual: float = float("inf"),
          necessary_only: bool = False) -> MembershipVerdict:
    return MembershipVerdict(False, stage, None, residual, necessary_only)


def reconstruct_shallow(Ps: Sequence[HomPoly], Q: HomPoly, arch,
                        tol: float = 1e-6, seed: int = 0,
                        require_real: bool = False) -> MembershipVerdict:
    """Recover one-hidden-layer weights from a candidate output tuple."""
    if not isinstance(arch, Architecture):
        arch = Architecture(tuple(arch))
    if not arch.is_shallow():
        raise ValueError("expected a one-hidden-layer architecture")
    n, m, k = arch.dims
    prof = degrees(arch)
    if (Q.nvars != n or Q.degree != prof.denominator_degree or len(Ps) != k
            or any(p.nvars != n or p.degree != prof.numerator_degree for p in Ps)):
        return _fail(Stage.DEGREE_TEST)
    Q = _to_complex_poly(Q)
    Ps = [_to_complex_poly(p) for p in Ps]

    report = factor_multilinear(Q, tol=min(tol, 1e-8), seed=seed)
    if not report.decomposable or (require_real and not report.all_real):
        return _fail(Stage.FACTOR_TEST, report.factorization.residual if report.factorization else float("inf"))
    rows = [np.asarray(f.coeffs, dtype=complex) for f in report.factorization.factors]
    rows[0] = rows[0] * report.factorization.constant  # fold scale so the row product is Q itself

    forms = [HomPoly.linear(COMPLEX, r) for r in rows]
    hats, _ = deleted_products(forms)
    basis = monomials(n, m - 1)
    A = np.array([[complex(h.coefficient(e)) for h in hats] for e in basis])
    W2 = np.zeros((k, m), dtype=complex)
    for i, p in enumerate(Ps):
        rhs = np.array([complex(p.coefficient(e)) for e in basis])
        sol = np.linalg.lstsq(A, rhs, rcond=None)[0]
        W2[i] = sol
        scale = max(np.max(np.abs(rhs)), 1e-300)
        if np.max(np.abs(A @ sol - rhs)) > tol * scale:
            return _fail(Stage.SPAN_TEST, float(np.max(np.abs(A @ sol - rhs)) / scale))
    if require_real and np.max(np.abs(W2.imag)) > tol * max(np.max(np.abs(W2)), 1e-300):
        return _fail(Stage.SPAN_TEST)

    w = Weights(arch, COMPLEX,
                (tuple(tuple(complex(v) for v in r) for r in rows),
                 tuple(tuple(complex(v) for v in r) for r in W2)))
    target = RationalTuple(tuple(Ps), Q)
    mism = projective_mismatch(forward_recursive(w), target)
    if mism > tol:
        return _fail(Stage.VERIFICATION_FAIL, mism)
    return MembershipVerdict(True, Stage.NONE, w, mism)


class _BinaryStageError(Exception):
    def __init__(self, stage: Stage):
        self.stage = stage


def reconstruct_binary(P: HomPoly, Q: HomPoly, layers: int,
                       tol: float = 1e-6) -> MembershipVerdict:
    """Recover (2, ..., 2, 1) weights from a single-output binary pair."""
    if layers < 2:
        raise ValueError("need at least 2 layers")
    arch = Architecture((2,) * layers + (1,))
    prof = degrees(arch)
    if (P.nvars != 2 or Q.nvars != 2 or P.degree != prof.numerator_degree
            or Q.degree != prof.denominator_degree):
        return _fail(Stage.DEGREE_TEST)
    P = _to_complex_poly(P)
    Q = _to_complex_poly(Q)
    try:
        mats = _binary_rec(P, Q, layers, tol)
    except _BinaryStageError as ex:
        return _fail(ex.stage)
    w = Weights(arch, COMPLEX, tuple(tuple(tuple(row) for row in m) for m in mats))
    target = RationalTuple((P,), Q)
    mism = projective_mismatch(forward_recursive(w), target)
    if mism > tol:
        return _fail(Stage.VERIFICATION_FAIL, mism)
    return MembershipVerdict(True, Stage.NONE, w, mism)


def _binary_rec(P: HomPoly, Q: HomPoly, layers: int, tol: float) -> list:
    if layers == 2:
        c11 = complex(Q.coefficient((2, 0)))
        c12 = complex(Q.coefficient((1, 1))) / 2.0
        c22 = complex(Q.coefficient((0, 2)))
        if Q.is_zero():
            raise _BinaryStageError(Stage.FACTOR_TEST)
        l1, l2 = factor_quadratic_explicit(c11, c12, c22)
        W1 = np.array([l1.coeffs, l2.coeffs], dtype=complex)
        if abs(np.linalg.det(W1)) < PROPORTIONAL_TOL * max(np.max(np.abs(W1)) ** 2, 1e-300):
            raise _BinaryStageError(Stage.REPEATED_FACTORS)
        cp = np.array([complex(P.coefficient((1, 0))), complex(P.coefficient((0, 1)))])
        W2 = cp @ np.linalg.inv(W1) @ SWAP
        return [W1.tolist(), [W2.tolist()]]
    even = layers % 2 == 0
    src = Q if even else P
    try:
        # loose reassembly bound: clustered (near-multiple) roots cannot meet
        # a tight one, and soundness rests on the final forward-map check
        fz = factor_binary_form(src, tol=1e-4)
    except (NonConvergenceError, ValueError) as ex:
        raise _BinaryStageError(Stage.FACTOR_TEST) from ex
    pair = _most_independent_pair([np.asarray(f.coeffs, dtype=complex) for f in fz.factors])
    if pair is None:
        raise _BinaryStageError(Stage.REPEATED_FACTORS)
    W1 = np.array(pair, dtype=complex)
    B = SWAP @ W1  # the peeled subnetwork sees coordinates composed with one swap
    Binv = np.linalg.inv(B)
    rows = [tuple(Binv[i]) for i in range(2)]
    Psub = P.compose_linear(rows)
    Qsub = Q.compose_linear(rows)
    try:
        if even:
            Qsub = Qsub.exact_divide(LinearForm((1 + 0j, 0j)), tol).exact_divide(LinearForm((0j, 1 + 0j)), tol)
        else:
            Psub = Psub.exact_divide(LinearForm((1 + 0j, 0j)), tol).exact_divide(LinearForm((0j, 1 + 0j)), tol)
    except NotDivisibleError as ex:
        raise _BinaryStageError(Stage.VERIFICATION_FAIL) from ex
    sub = _binary_rec(Psub, Qsub, layers - 1, tol)
    return [W1.tolist()] + sub


def _most_independent_pair(vecs: list[np.ndarray]):
    """The two direction vectors with the smallest normalized inner product;
    None when every pair is proportional within tolerance."""
    units = [v / np.linalg.norm(v) for v in vecs]
    best = None
    for i in range(len(units)):
        for j in range(i + 1, len(units)):
            overlap = abs(np.vdot(units[i], units[j]))
            if best is None or overlap < best[0]:
                best = (overlap, i, j)
    if best is None:
        return None
    overlap, i, j = best
    if 1.0 - overlap < PROPORTIONAL_TOL:
        return None
    return vecs[i], vecs[j]


def resultant_binary(p: HomPoly, q: HomPoly) -> complex:
    """Sylvester resultant of two binary forms (coefficient convention:
    descending powers of the first variable)."""
    if p.nvars != 2 or q.nvars != 2:
        raise ValueError("resultant is defined here for binary forms")
    dp, dq = p.degree, q.degree
    a = [complex(p.coefficient((dp - k, k))) for k in range(dp + 1)]
    b = [complex(q.coefficient((dq - k, k))) for k in range(dq + 1)]
    n = dp + dq
    S = np.zeros((n, n), dtype=complex)
    for i in range(dq):
        S[i, i:i + dp + 1] = a
    for i in range(dp):
        S[dq + i, i:i + dq + 1] = b
    return complex(np.linalg.det(S))


def membership_binary_multioutput(Ps: Sequence[HomPoly], Q: HomPoly, layers: int,
                                  tol: float = 1e-8) -> MembershipVerdict:
    """Necessary-condition screen for multi-output binary architectures:
    numerators must pairwise share all but one linear factor, so every
    pairwise resultant vanishes.  Passing is not sufficient."""
    if any(p.nvars != 2 for p in Ps) or Q.nvars != 2:
        return _fail(Stage.DEGREE_TEST, necessary_only=True)
    Ps = [_to_complex_poly(p) for p in Ps]
    worst = 0.0
    for i in range(len(Ps)):
        for j in range(i + 1, len(Ps)):
            a = Ps[i].scale(1.0 / max(Ps[i].max_magnitude(), 1e-300))
            b = Ps[j].scale(1.0 / max(Ps[j].max_magnitude(), 1e-300))
            worst = max(worst, abs(resultant_binary(a, b)))
    if worst > tol:
        return MembershipVerdict(False, Stage.VERIFICATION_FAIL, None, worst, True)
    return MembershipVerdict(True, Stage.NONE, None, worst, True)


def reconstruct_auto(t: RationalTuple, arch: Architecture, tol: float = 1e-6,
                     seed: int = 0) -> MembershipVerdict:
    """Dispatch to the shallow or deep-binary procedure for this shape."""
    if arch.is_shallow():
        return reconstruct_shallow(list(t.numerators), t.denominator, arch, tol=tol, seed=seed)
    if arch.is_binary() and arch.dL == 1:
        return reconstruct_binary(t.numerators[0], t.denominator, arch.layers, tol=tol)
    raise ValueError(f"no reconstruction procedure for architecture {arch}")


def round_trip_residual(w: Weights, tol: float = 1e-6, seed: int = 0) -> float:
    """Forward map, reconstruct, forward map again; max relative coefficient
    error between the two tuples after projective normalization."""
    target = _tuple_to_complex(forward_recursive(w))
    verdict = reconstruct_auto(target, w.arch, tol=float("inf"), seed=seed)
    if verdict.weights is None:
        raise ReconstructionError(verdict)
    again = forward_recursive(verdict.weights)
    return projective_mismatch(target, again)
