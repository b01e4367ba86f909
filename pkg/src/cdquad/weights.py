"""Weight families over finite coordinate sets and their derived scalars.

A weight model assigns a nonnegative importance gamma_u to every finite set
of coordinate indices, with gamma of the empty set fixed to 1.  Variants:
product, finite-product (order cutoff), POD, explicit finite maps, and
finite-intersection families.  Scalars derived here (decay exponent, power
sums, cut-off weights) drive the sample-allocation planner.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Mapping, Sequence

CoordSet = frozenset


@dataclass(frozen=True)
class Truncation:
    """Caps for enumerations over infinitely many coordinate sets."""

    max_index: int = 1000
    max_order: int = 6


@dataclass(frozen=True)
class PowerSumResult:
    value: float
    tail_bound: float | None = None
    diverged: bool = False

    def __float__(self):
        return self.value


class WeightModel:
    """Common query surface for all weight variants."""

    declared_decay: float | None = None

    def gamma(self, u) -> float:
        raise NotImplementedError

    def hat_gamma(self, u, k_aa: float) -> float:
        """gamma_u scaled by the anchor diagonal, gamma_u * k_aa^{|u|}."""
        if k_aa < 0:
            raise ValueError("anchor diagonal must be nonnegative")
        u = frozenset(u)
        return self.gamma(u) * k_aa ** len(u)

    def singleton(self, j: int) -> float:
        return self.gamma(frozenset([j]))

    def cutoff_order1(self, max_index: int = 1000) -> "ExplicitWeights":
        """Weights keeping only the singleton masses; everything else zero."""
        table = {}
        for j in range(1, max_index + 1):
            g = self.singleton(j)
            if g > 0:
                table[frozenset([j])] = g
        return ExplicitWeights(table, _skip_closure_check=True)

    def decay(self) -> float:
        """Analytic decay exponent, if one is known, else the declared one."""
        if self.declared_decay is not None:
            return self.declared_decay
        raise ValueError(
            f"{type(self).__name__} has no analytic decay; declare one at construction"
        )

    def weighted_power_sum(self, exponent: float, truncation: Truncation = Truncation()) -> PowerSumResult:
        """sum over nonempty u of gamma_u^exponent, within the truncation box."""
        raise NotImplementedError

    def support_closure(self) -> set[CoordSet]:
        raise ValueError(f"{type(self).__name__} has infinite support")

    def has_finite_support(self) -> bool:
        return False

    def descriptor(self) -> dict:
        """JSON-serializable summary for plan files and study sidecars."""
        raise NotImplementedError


def _check_decreasing(seq: Callable[[int], float], upto: int = 50):
    prev = None
    for j in range(1, upto + 1):
        g = seq(j)
        if g < 0:
            raise ValueError(f"negative singleton weight at j={j}")
        if prev is not None and g > prev + 1e-15:
            raise ValueError("singleton weights must be nonincreasing in the index")
        prev = g


def _bounded_order_power_sum(gammas: Sequence[float], exponent: float, max_order: int) -> float:
    """sum over nonempty u within the index list, |u| <= max_order, of (prod gamma)^e.

    Elementary-symmetric-function recursion; exact enumeration value.
    """
    es = [0.0] * (max_order + 1)
    es[0] = 1.0
    for g in gammas:
        ge = g**exponent if g > 0 else 0.0
        for k in range(min(max_order, len(gammas)), 0, -1):
            es[k] += es[k - 1] * ge
    return sum(es[1:])


@dataclass(frozen=True)
class ProductWeights(WeightModel):
    """gamma_u = prod_{j in u} gamma_j for a nonincreasing singleton sequence."""

    gamma_seq: Callable[[int], float]
    declared_decay: float | None = None

    def __post_init__(self):
        _check_decreasing(self.gamma_seq)

    @classmethod
    def polynomial(cls, a: float, c: float = 1.0) -> "ProductWeights":
        """gamma_j = c * j^{-a}; decay exponent is a."""
        if a <= 0 or c < 0:
            raise ValueError("need a > 0 and c >= 0")
        w = cls(lambda j, _a=a, _c=c: _c * j ** (-_a), declared_decay=a)
        object.__setattr__(w, "_poly_params", (a, c))
        return w

    def gamma(self, u) -> float:
        out = 1.0
        for j in frozenset(u):
            out *= self.gamma_seq(j)
        return out

    def weighted_power_sum(self, exponent: float, truncation: Truncation = Truncation()) -> PowerSumResult:
        if not 0 < exponent <= 1:
            raise ValueError("exponent must be in (0, 1]")
        gs = [self.gamma_seq(j) for j in range(1, truncation.max_index + 1)]
        value = _bounded_order_power_sum(gs, exponent, truncation.max_order)
        tail = None
        diverged = False
        params = getattr(self, "_poly_params", None)
        if params is not None:
            a, c = params
            ae = a * exponent
            if ae <= 1:
                diverged = True
            else:
                # sum_{j>T} (c j^-a)^e <= c^e * T^{1-ae}/(ae-1); the full-product
                # remainder is bounded by (1+value_head) * (exp(tail_singletons)-1)
                t_single = (c**exponent) * truncation.max_index ** (1 - ae) / (ae - 1)
                tail = (1.0 + value) * math.expm1(t_single)
        else:
            # generic Cauchy check on the singleton partial sums
            half = _bounded_order_power_sum(gs[: truncation.max_index // 2], exponent, truncation.max_order)
            if value - half > max(1e-9, 1e-6 * abs(value)):
                diverged = True
        if diverged:
            warnings.warn("weighted power sum looks divergent at this exponent", RuntimeWarning)
        return PowerSumResult(value, tail, diverged)

    def descriptor(self) -> dict:
        params = getattr(self, "_poly_params", None)
        d = {"variant": "product"}
        if params is not None:
            d["decay"], d["scale"] = params
        return d


@dataclass(frozen=True)
class FiniteProductWeights(WeightModel):
    """Product weights truncated to sets of size at most `order`."""

    order: int
    gamma_seq: Callable[[int], float]
    declared_decay: float | None = None

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        _check_decreasing(self.gamma_seq)

    @classmethod
    def polynomial(cls, order: int, a: float, c: float = 1.0) -> "FiniteProductWeights":
        w = cls(order, lambda j, _a=a, _c=c: _c * j ** (-_a), declared_decay=a)
        object.__setattr__(w, "_poly_params", (a, c))
        return w

    def gamma(self, u) -> float:
        u = frozenset(u)
        if len(u) > self.order:
            return 0.0
        out = 1.0
        for j in u:
            out *= self.gamma_seq(j)
        return out

    def weighted_power_sum(self, exponent: float, truncation: Truncation = Truncation()) -> PowerSumResult:
        if not 0 < exponent <= 1:
            raise ValueError("exponent must be in (0, 1]")
        gs = [self.gamma_seq(j) for j in range(1, truncation.max_index + 1)]
        cap = min(self.order, truncation.max_order)
        value = _bounded_order_power_sum(gs, exponent, cap)
        return PowerSumResult(value, None, False)

    def descriptor(self) -> dict:
        d = {"variant": "finite-product", "order": self.order}
        params = getattr(self, "_poly_params", None)
        if params is not None:
            d["decay"], d["scale"] = params
        return d


@dataclass(frozen=True)
class PODWeights(WeightModel):
    """Product-and-order-dependent weights Gamma_{|u|} * prod gamma_j."""

    order_factors: Callable[[int], float]
    gamma_seq: Callable[[int], float]
    declared_decay: float | None = None

    def __post_init__(self):
        _check_decreasing(self.gamma_seq)
        if abs(self.order_factors(0) - 1.0) > 0 or abs(self.order_factors(1) - 1.0) > 0:
            raise ValueError("order factors must satisfy Gamma_0 = Gamma_1 = 1")

    def gamma(self, u) -> float:
        u = frozenset(u)
        out = self.order_factors(len(u))
        for j in u:
            out *= self.gamma_seq(j)
        return out

    def weighted_power_sum(self, exponent: float, truncation: Truncation = Truncation()) -> PowerSumResult:
        if not 0 < exponent <= 1:
            raise ValueError("exponent must be in (0, 1]")
        gs = [self.gamma_seq(j) for j in range(1, truncation.max_index + 1)]
        # order-k slice of the symmetric recursion, scaled by Gamma_k^e
        es = [0.0] * (truncation.max_order + 1)
        es[0] = 1.0
        for g in gs:
            ge = g**exponent if g > 0 else 0.0
            for k in range(truncation.max_order, 0, -1):
                es[k] += es[k - 1] * ge
        value = sum(self.order_factors(k) ** exponent * es[k] for k in range(1, truncation.max_order + 1))
        return PowerSumResult(value, None, False)

    def descriptor(self) -> dict:
        return {"variant": "pod"}


def intersection_degree(support: Mapping[CoordSet, float]) -> int:
    """Smallest rho such that every positive set meets at most 1+rho positive sets."""
    pos = [u for u, g in support.items() if g > 0 and u]
    worst = 0
    for u in pos:
        hits = sum(1 for v in pos if u & v)
        worst = max(worst, hits)
    return max(0, worst - 1)


def per_coordinate_multiplicity(support: Mapping[CoordSet, float]) -> int:
    """Smallest eta bounding how many positive sets contain any one coordinate."""
    pos = [u for u, g in support.items() if g > 0 and u]
    counts: dict[int, int] = {}
    for u in pos:
        for j in u:
            counts[j] = counts.get(j, 0) + 1
    return max(counts.values(), default=0)


class _FiniteSupportMixin:
    """Shared queries for weights given by an explicit finite table."""

    table: Mapping[CoordSet, float]

    def gamma(self, u) -> float:
        u = frozenset(u)
        if not u:
            return 1.0
        return self.table.get(u, 0.0)

    def has_finite_support(self) -> bool:
        return True

    def support_closure(self) -> set[CoordSet]:
        out = {frozenset()}
        for u, g in self.table.items():
            if g <= 0:
                continue
            items = sorted(u)
            for k in range(1, len(items) + 1):
                for sub in combinations(items, k):
                    out.add(frozenset(sub))
        return out

    def weighted_power_sum(self, exponent: float, truncation: Truncation = Truncation()) -> PowerSumResult:
        if not 0 < exponent <= 1:
            raise ValueError("exponent must be in (0, 1]")
        total = 0.0
        for u, g in sorted(self.table.items(), key=lambda kv: (len(kv[0]), sorted(kv[0]))):
            if not u or g <= 0:
                continue
            if len(u) > truncation.max_order or max(u) > truncation.max_index:
                continue
            total += g**exponent
        return PowerSumResult(total, 0.0, False)

    def _validate_table(self):
        for u, g in self.table.items():
            if g < 0:
                raise ValueError(f"negative weight for {sorted(u)}")
            if not u and g != 1.0:
                raise ValueError("the empty set carries weight 1 by convention")

    def is_monotone(self) -> bool:
        """True if gamma_u >= gamma_v for every listed pair with u subset of v."""
        items = [(u, g) for u, g in self.table.items() if g > 0]
        for u, gu in items:
            for v, gv in items:
                if u < v and gu < gv - 1e-15:
                    return False
        return True

    def _validate_monotone(self):
        # subset monotonicity of positivity, and of magnitude where both listed
        for u, g in self.table.items():
            if g <= 0 or not u:
                continue
            items = sorted(u)
            for k in range(1, len(items)):
                for sub in combinations(items, k):
                    gs = self.gamma(frozenset(sub))
                    if gs <= 0:
                        raise ValueError(
                            f"positivity not downward monotone: {sorted(u)} > 0 but {list(sub)} = 0"
                        )


@dataclass(frozen=True)
class ExplicitWeights(_FiniteSupportMixin, WeightModel):
    """Finite map u -> gamma_u with implied zeros elsewhere."""

    table: Mapping[CoordSet, float]
    _skip_closure_check: bool = field(default=False, repr=False)

    def __post_init__(self):
        object.__setattr__(
            self, "table", {frozenset(u): float(g) for u, g in self.table.items() if frozenset(u)}
        )
        self._validate_table()
        if not self._skip_closure_check:
            self._validate_monotone()

    declared_decay = math.inf

    def decay(self) -> float:
        return math.inf

    def cutoff_order1(self, max_index: int = 1000) -> "ExplicitWeights":
        table = {u: g for u, g in self.table.items() if len(u) == 1 and g > 0}
        return ExplicitWeights(table, _skip_closure_check=True)

    def descriptor(self) -> dict:
        return {
            "variant": "explicit",
            "support": {",".join(map(str, sorted(u))): g for u, g in sorted(self.table.items(), key=lambda kv: (len(kv[0]), sorted(kv[0])))},
        }


@dataclass(frozen=True)
class FiniteIntersectionWeights(_FiniteSupportMixin, WeightModel):
    """Finite-order weights whose positive sets pairwise overlap only rarely.

    The intersection-degree bound is checked at construction.  A declared
    decay exponent may be supplied when the table is a truncation of an
    infinite family.
    """

    table: Mapping[CoordSet, float]
    rho: int = 1
    declared_decay: float | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "table", {frozenset(u): float(g) for u, g in self.table.items() if frozenset(u)}
        )
        self._validate_table()
        self._validate_monotone()
        actual = intersection_degree(self.table)
        if actual > self.rho:
            raise ValueError(f"intersection degree {actual} exceeds declared bound {self.rho}")

    def decay(self) -> float:
        return self.declared_decay if self.declared_decay is not None else math.inf

    def order(self) -> int:
        return max((len(u) for u, g in self.table.items() if g > 0), default=0)

    def cutoff_order1(self, max_index: int = 1000) -> ExplicitWeights:
        table = {u: g for u, g in self.table.items() if len(u) == 1 and g > 0}
        return ExplicitWeights(table, _skip_closure_check=True)

    def descriptor(self) -> dict:
        return {
            "variant": "finite-intersection",
            "rho": self.rho,
            "declared_decay": self.declared_decay,
            "support": {",".join(map(str, sorted(u))): g for u, g in sorted(self.table.items(), key=lambda kv: (len(kv[0]), sorted(kv[0])))},
        }


def disjoint_pair_weights(a: float, count: int) -> FiniteIntersectionWeights:
    """Pairs {2j-1, 2j} with gamma = j^-a, singletons matching, j = 1..count.

    Each pair overlaps only itself and its two singletons, so the
    intersection degree is 2; the decay exponent is a.
    """
    table: dict[CoordSet, float] = {}
    for j in range(1, count + 1):
        g = float(j) ** (-a)
        lo, hi = 2 * j - 1, 2 * j
        table[frozenset([lo, hi])] = g
        table[frozenset([lo])] = g
        table[frozenset([hi])] = g
    return FiniteIntersectionWeights(table, rho=2, declared_decay=a)
