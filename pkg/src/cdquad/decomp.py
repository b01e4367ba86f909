"""Anchored decomposition machinery.

Projections onto finitely many coordinates, anchored components via
inclusion-exclusion, alternating sums over active-set families, and the
worst-case scalars (bias, r^2, projection operator norm) that drive the
changing dimension planner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Mapping

from .weights import (
    FiniteProductWeights,
    PODWeights,
    ProductWeights,
    Truncation,
    WeightModel,
)

CoordSet = frozenset[int]

#: inclusion-exclusion over 2^{|u|} evaluations; refuse beyond this
DEFAULT_ORDER_CAP = 20


@dataclass(frozen=True)
class Anchor:
    """Constant anchor a = (a, a, ...)."""

    value: float = 0.5

    def __post_init__(self):
        if not 0 <= self.value <= 1:
            raise ValueError("anchor must lie in [0, 1]")


@dataclass
class BlackBoxIntegrand:
    """A function of countably many variables, queried at points that differ
    from the anchor in finitely many coordinates.

    evaluator(assignment, anchor_value) receives a dict {coordinate: value}
    (1-based coordinates; values may be scalars or aligned numpy arrays) and
    must treat every unassigned coordinate as sitting at anchor_value.
    """

    evaluator: Callable[[Mapping[int, object], float], object]
    declared_active: CoordSet | None = None
    known_integral: float | None = None
    # optional analytic anchored components, (u, assignment, anchor_value) ->
    # value; bypasses the 2^|u| inclusion-exclusion when the integrand's
    # structure admits a closed form
    anchored: Callable | None = None

    def __call__(self, assignment: Mapping[int, object], anchor: Anchor):
        return self.evaluator(dict(assignment), anchor.value)


def psi_project(f: BlackBoxIntegrand, v, a: Anchor, x: Mapping[int, object]):
    """f at (x_v; a): coordinates in v from x, the rest at the anchor."""
    v = frozenset(v)
    missing = v - set(x)
    if missing:
        raise KeyError(f"assignment missing coordinates {sorted(missing)}")
    return f({j: x[j] for j in v}, a)


def anchored_component(
    f: BlackBoxIntegrand,
    u,
    a: Anchor,
    x: Mapping[int, object],
    cap: int = DEFAULT_ORDER_CAP,
    _memo: dict | None = None,
):
    """The u-component of the anchored decomposition at x:
    sum over v subseteq u of (-1)^{|u minus v|} f(x_v; a).

    Coordinates of u missing from x are taken at the anchor.  Evaluations are
    memoized within the call (pass a shared dict to memoize across calls).
    """
    u = sorted(frozenset(u))
    if len(u) > cap:
        raise ValueError(f"|u| = {len(u)} exceeds the inclusion-exclusion cap {cap}")
    x = {j: x.get(j, a.value) for j in u}
    if f.anchored is not None:
        return f.anchored(frozenset(u), x, a.value)
    memo = {} if _memo is None else _memo
    total = None
    for k in range(len(u) + 1):
        sign = (-1) ** (len(u) - k)
        for v in combinations(u, k):
            key = frozenset(v)
            if key not in memo:
                memo[key] = psi_project(f, key, a, x)
            term = memo[key]
            total = sign * term if total is None else total + sign * term
    return total


def alt_sum_S(Q, u) -> int:
    """S_{Q,u} = sum over v in Q with v subseteq u of (-1)^{|v|}."""
    u = frozenset(u)
    return sum((-1) ** len(v) for v in Q if frozenset(v) <= u)


def downward_closure(Q) -> set[CoordSet]:
    out = {frozenset()}
    for q in Q:
        items = sorted(q)
        for k in range(1, len(items) + 1):
            out.update(frozenset(c) for c in combinations(items, k))
    return out


def psi_Q_project(f: BlackBoxIntegrand, Q, a: Anchor) -> BlackBoxIntegrand:
    """The projection of f onto the subspaces sampled by an active set Q:
    Psi_Q f = sum over u in closure(Q) of f_{u,a}.

    On assignments whose support lies in the closure the projection returns
    the very same evaluator call as f, so any algorithm that only looks at
    such points receives bit-identical values from f and its projection.
    """
    closure = downward_closure(Q)
    active = frozenset().union(*closure) if closure else frozenset()

    def ev(assignment, anchor_value):
        support = frozenset(assignment)
        if support in closure:
            return f.evaluator(assignment, anchor_value)
        total = None
        anch = Anchor(anchor_value)
        memo: dict = {}
        for u in sorted(closure, key=lambda s: (len(s), sorted(s))):
            term = anchored_component(f, u, anch, assignment, _memo=memo)
            total = term if total is None else total + term
        return total

    return BlackBoxIntegrand(ev, declared_active=active, known_integral=f.known_integral)


# --- worst-case scalars ----------------------------------------------------


@dataclass(frozen=True)
class TruncatedSum:
    value: float
    tail_bound: float | None = None

    def __float__(self):
        return self.value


def _esym(vals, kmax: int) -> list[float]:
    """Elementary symmetric sums e_0..e_kmax of a float sequence."""
    es = [0.0] * (kmax + 1)
    es[0] = 1.0
    for g in vals:
        for k in range(min(kmax, len(vals)), 0, -1):
            es[k] += es[k - 1] * g
    return es


def _order_factor(w: WeightModel, k: int) -> float:
    if isinstance(w, PODWeights):
        return w.order_factors(k)
    if isinstance(w, FiniteProductWeights):
        return 1.0 if k <= w.order else 0.0
    return 1.0


def _poly_singleton_tail(w: WeightModel, scale: float, T: Truncation) -> float | None:
    """Bound on sum_{j > max_index} scale * gamma_j, when analytic."""
    params = getattr(w, "_poly_params", None)
    if params is None:
        return None
    a, c = params
    if a <= 1:
        return math.inf
    return scale * c * T.max_index ** (1 - a) / (a - 1)


def bias_squared(Q, w: WeightModel, k_aa: float, T: Truncation = Truncation()) -> TruncatedSum:
    """Worst-case squared bias of a changing dimension rule with active set Q:
    sum over nonempty u of S_{Q,u}^2 gamma_u k_aa^{|u|}.

    Exact over the support for finite-support weights.  For product-type
    weights the sum is folded onto traces t = u intersect V (V the union of
    Q) since S depends on u only through t; the remainder past the truncation
    box is reported via the 4^{|u|} cap on S^2.
    """
    Q = [frozenset(q) for q in Q]
    if w.has_finite_support():
        total = 0.0
        for u in sorted(w.support_closure(), key=lambda s: (len(s), sorted(s))):
            if not u:
                continue
            total += alt_sum_S(Q, u) ** 2 * w.gamma(u) * k_aa ** len(u)
        return TruncatedSum(total, 0.0)
    if not isinstance(w, (ProductWeights, FiniteProductWeights, PODWeights)):
        raise TypeError(f"no bias evaluation path for {type(w).__name__}")
    if isinstance(w, ProductWeights):
        total = _bias_product(Q, w, k_aa, T)
    else:
        total = _bias_trace_fold(Q, w, k_aa, T)
    tail = _poly_singleton_tail(w, 4.0 * k_aa, T)
    if tail is not None and math.isfinite(tail):
        head4 = math.prod(1.0 + 4.0 * w.gamma_seq(j) * k_aa for j in range(1, T.max_index + 1))
        tail = head4 * math.expm1(tail)
    return TruncatedSum(total, tail)


def _bias_product(Q, w, k_aa: float, T: Truncation) -> float:
    """Exact bias sum for product weights via the pair expansion
    S^2 = sum over (v, v') in Q^2, then Moebius inversion on v intersect v':
    total = G * sum_{t in Q} m_t^2 / prod_{j in t} g_j - 1 with
    m_t = sum_{v in Q, v superset t} (-1)^{|v|} prod_{j in v} g_j/(1+g_j).
    Linear in the subset lattice of Q instead of exponential in |union Q|."""
    J = T.max_index
    gseq = {j: w.gamma_seq(j) * k_aa for j in range(1, J + 1)}
    G = math.prod(1.0 + g for g in gseq.values())
    m: dict = {}
    for v in Q:
        a = (-1.0) ** len(v)
        for j in v:
            g = gseq[j]
            a *= g / (1.0 + g)
        for r in range(len(v) + 1):
            for t in combinations(sorted(v), r):
                m[t] = m.get(t, 0.0) + a
    F = 0.0
    for t, mt in m.items():
        inv = 1.0
        for j in t:
            inv /= gseq[j]
        F += inv * mt * mt
    return G * F - 1.0


def _bias_trace_fold(Q, w, k_aa: float, T: Truncation) -> float:
    """Bias sum folded onto traces t = u intersect V (V the union of Q);
    S depends on u only through the trace.  Used for the order-capped
    families, where the order factor kills all but small traces."""
    V = sorted(frozenset().union(*Q)) if Q else []
    outside = [w.gamma_seq(j) * k_aa for j in range(1, T.max_index + 1) if j not in set(V)]
    kmax = T.max_order
    es = _esym(outside, kmax)
    rmax = len(V)
    if isinstance(w, FiniteProductWeights):
        rmax = min(rmax, w.order)
    total = 0.0
    for r in range(rmax + 1):
        for t in combinations(V, r):
            S2 = alt_sum_S(Q, frozenset(t)) ** 2
            if S2 == 0:
                continue
            gt = 1.0
            for j in t:
                gt *= w.gamma_seq(j) * k_aa
            for k in range(0, kmax - r + 1):
                if r + k == 0:
                    continue  # u must be nonempty
                total += S2 * _order_factor(w, r + k) * gt * es[k]
    return total


def r_squared(v, u, a_diag: float, w: WeightModel, T: Truncation = Truncation()) -> TruncatedSum:
    """r^2_{v,u,a} = sum over u' disjoint from v of gamma_{u union u'} k_aa^{|u'|};
    a_diag is the anchor diagonal k(a, a).  Requires u subseteq v."""
    v, u = frozenset(v), frozenset(u)
    if not u <= v:
        raise ValueError("u must be a subset of v")
    if w.has_finite_support():
        total = 0.0
        for s in sorted(w.support_closure() | {frozenset()}, key=lambda t: (len(t), sorted(t))):
            if s >= u and not (s - u) & v:
                g = w.gamma(s)
                if g > 0:
                    total += g * a_diag ** len(s - u)
        return TruncatedSum(total, 0.0)
    if not isinstance(w, (ProductWeights, FiniteProductWeights, PODWeights)):
        raise TypeError(f"no r^2 evaluation path for {type(w).__name__}")
    pool = [w.gamma_seq(j) * a_diag for j in range(1, T.max_index + 1) if j not in v]
    gu = 1.0
    for j in u:
        gu *= w.gamma_seq(j)
    if isinstance(w, ProductWeights):
        # closed form: gamma_u * prod over the pool of (1 + gamma_j k_aa)
        value = gu * math.prod(1.0 + g for g in pool)
        tail = _poly_singleton_tail(w, a_diag, T)
        if tail is not None and math.isfinite(tail):
            tail = value * math.expm1(tail)
        return TruncatedSum(value, tail)
    es = _esym(pool, T.max_order)
    value = sum(_order_factor(w, len(u) + k) * gu * es[k] for k in range(T.max_order + 1))
    return TruncatedSum(value, None)


def psi_operator_norm(
    v, a_diag: float, w: WeightModel, T: Truncation = Truncation(), cap: int = DEFAULT_ORDER_CAP
) -> float:
    """Operator norm of the anchored projection onto coordinates v:
    max over u subseteq v with gamma_u > 0 of gamma_u^{-1/2} r_{v,u,a}."""
    v = sorted(frozenset(v))
    if len(v) > cap:
        raise ValueError(f"|v| = {len(v)} exceeds the enumeration cap {cap}")
    best = 0.0
    for k in range(len(v) + 1):
        for u in combinations(v, k):
            g = w.gamma(frozenset(u))
            if g <= 0:
                continue
            r2 = r_squared(v, u, a_diag, w, T).value
            best = max(best, math.sqrt(r2 / g))
    return best
