"""The changing dimension algorithm.

Plans allocate sample counts n_u to finitely many coordinate subsets from a
target accuracy, weights, and building-block variance assumptions; the
estimator runs one independent randomized rule per active subset on the
anchored component f_{u,a} and charges cost in the unrestricted subspace
sampling model (2^{|u|} anchored evaluations of price $(|u|) per point).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable

from .decomp import Anchor, BlackBoxIntegrand, anchored_component
from .kernels import kernel_diag
from .prf import derive_seed
from .quadrature import INTERLACED_PLR, MONTE_CARLO, RuleSpec, run_rule, run_rule_seeds
from .weights import Truncation, WeightModel

CoordSet = frozenset[int]

MAX_ACTIVE_SETS = 100_000
MAX_SET_SIZE = 20


class PlanningError(ValueError):
    pass


# --- cost models -----------------------------------------------------------


@dataclass(frozen=True)
class CostModel:
    """Price $(nu) of one function evaluation with nu non-anchor variables."""

    name: str
    fn: Callable[[int], float]

    def __call__(self, nu: int) -> float:
        v = self.fn(nu)
        if v < 1:
            raise ValueError("cost must satisfy $(nu) >= 1")
        return v


def cost_model(name: str, **params) -> CostModel:
    if name == "linear":
        return CostModel("linear", lambda nu: 1.0 + nu)
    if name == "power":
        s = params.get("s", 1.0)
        return CostModel(f"power(s={s})", lambda nu: (1.0 + nu) ** s)
    if name == "exp":
        sigma = params.get("sigma", 1.0)
        return CostModel(f"exp(sigma={sigma})", lambda nu: math.exp(sigma * nu))
    raise ValueError(f"unknown cost model {name!r}")


# --- planner ---------------------------------------------------------------


@dataclass(frozen=True)
class PlannerConstants:
    """Everything the n_u formula needs.

    tau is the building-block variance decay rate; when it is not below
    decay - 1 it is replaced by decay - 1 - delta, mirroring the analysis.
    alpha0 defaults to the midpoint of its admissible interval
    (tau/decay, 1 - 1/decay).
    """

    eps: float
    tau: float
    decay: float
    k_aa: float
    alpha0: float
    L: float
    c: float = 1.0
    C: float = 1.0
    anchor: Anchor = field(default_factory=Anchor)
    delta: float = 0.01

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if not self.tau / self.decay < self.alpha0 < 1 - 1 / self.decay:
            raise ValueError(
                f"alpha0 = {self.alpha0} outside (tau/decay, 1 - 1/decay) = "
                f"({self.tau / self.decay}, {1 - 1 / self.decay})"
            )

    @property
    def C_hat(self) -> float:
        return max(self.C * (1 + self.k_aa), 4 * self.k_aa)

    @classmethod
    def for_weights(
        cls,
        w: WeightModel,
        eps: float,
        tau: float,
        chi: int = 1,
        anchor: Anchor | None = None,
        alpha0: float | None = None,
        c: float = 1.0,
        C: float = 1.0,
        delta: float = 0.01,
        truncation: Truncation = Truncation(),
    ) -> "PlannerConstants":
        decay = w.decay()
        if decay <= 1:
            raise PlanningError(f"weight decay {decay} must exceed 1")
        if tau >= decay - 1:
            tau = decay - 1 - delta
        if tau <= 0:
            raise PlanningError("effective tau is nonpositive; delta too large")
        anchor = anchor or Anchor()
        k_aa = float(kernel_diag(chi, anchor.value))
        if alpha0 is None:
            alpha0 = 0.5 * (tau / decay + 1 - 1 / decay)
        L = w.weighted_power_sum(1 - alpha0, truncation).value
        return cls(eps, tau, decay, k_aa, alpha0, L, c, C, anchor, delta)


@dataclass(frozen=True)
class RuleTemplate:
    kind: str = INTERLACED_PLR
    alpha: int = 1
    b: int = 2
    # variance-assumption metadata: both built-in rules satisfy alpha1 = 0
    alpha1: float = 0.0
    alpha2: float = 0.0


@dataclass(frozen=True)
class Plan:
    constants: PlannerConstants
    allocations: dict[CoordSet, int]
    template: RuleTemplate
    weights_descriptor: dict = field(default_factory=dict)

    def __post_init__(self):
        alloc = self.allocations
        if alloc.get(frozenset(), 0) != 1:
            raise ValueError("a plan must allocate exactly one point to the empty set")
        for u, n in alloc.items():
            if n < 1:
                raise ValueError("active sets need n_u >= 1")
            for j in u:
                if frozenset(u) - {j} not in alloc:
                    raise ValueError("active sets must be downward closed")

    @property
    def Q(self) -> set[CoordSet]:
        return set(self.allocations)

    def to_json(self) -> str:
        return json.dumps(
            {
                "constants": {
                    "eps": self.constants.eps,
                    "tau": self.constants.tau,
                    "decay": self.constants.decay,
                    "alpha0": self.constants.alpha0,
                    "k_aa": self.constants.k_aa,
                    "L": self.constants.L,
                    "c": self.constants.c,
                    "C": self.constants.C,
                    "anchor": self.constants.anchor.value,
                },
                "template": {"kind": self.template.kind, "alpha": self.template.alpha,
                             "b": self.template.b},
                "weights": self.weights_descriptor,
                "allocations": [[sorted(u), n] for u, n in
                                sorted(self.allocations.items(),
                                       key=lambda kv: (len(kv[0]), sorted(kv[0])))],
            },
            indent=2,
        )


def _n_prime(consts: PlannerConstants, size: int, gamma_u: float) -> int:
    lead = consts.c * consts.L * consts.C_hat**size * gamma_u**consts.alpha0
    if lead < consts.eps**2:
        return 0
    return _floor_tol((lead / consts.eps**2) ** (1 / consts.tau))


def _floor_tol(v: float) -> int:
    # guard the floor against float dust (e.g. 2/0.01 -> 199.99999999999997)
    return math.floor(v * (1 + 1e-12) + 1e-12)


def _round_up_power(n: int, b: int) -> int:
    m = 0
    while b**m < n:
        m += 1
    return b**m


def plan_build(
    w: WeightModel,
    consts: PlannerConstants,
    template: RuleTemplate = RuleTemplate(),
    truncation: Truncation = Truncation(),
) -> Plan:
    """Choose the active sets and their sample counts.

    n_u' comes straight from the accuracy formula; a set is kept active when
    any superset earns n' >= 1, which makes the family downward closed.
    Finite-support weights enumerate their support closure; product-type
    weights are searched depth-first with pruning justified by the decreasing
    singleton sequence.
    """
    n_prime: dict[CoordSet, int] = {}
    if w.has_finite_support():
        for u in w.support_closure():
            np_ = _n_prime(consts, len(u), w.gamma(u))
            if np_ >= 1:
                n_prime[frozenset(u)] = np_
    else:
        from .weights import PODWeights

        gamma_seq = getattr(w, "gamma_seq", None)
        if gamma_seq is None or isinstance(w, PODWeights):
            # the boost-product pruning below is only sound for (possibly
            # order-capped) product weights
            raise PlanningError(f"no planner enumeration for {type(w).__name__}")
        size_cap = min(MAX_SET_SIZE, getattr(w, "order", MAX_SET_SIZE))
        J = truncation.max_index
        boosts = [consts.C_hat * gamma_seq(j) ** consts.alpha0 for j in range(1, J + 1)]
        # suffix[j] = largest factor any extension using coords > j can add
        suffix = [1.0] * (J + 2)
        for j in range(J, 0, -1):
            suffix[j] = suffix[j + 1] * max(1.0, boosts[j - 1])
        eps2 = consts.eps**2

        def visit(u: tuple[int, ...], lead: float, next_j: int):
            if len(n_prime) > MAX_ACTIVE_SETS:
                raise PlanningError("active-set enumeration exceeded the hard cap")
            if lead >= eps2 and u:
                n_prime[frozenset(u)] = _floor_tol((lead / eps2) ** (1 / consts.tau))
            if len(u) >= size_cap:
                return
            for j in range(next_j, J + 1):
                ext = lead * boosts[j - 1]
                if ext * suffix[j + 1] < eps2:
                    break  # boosts decrease with j: no deeper branch can recover
                visit(u + (j,), ext, j + 1)

        base = consts.c * consts.L * float(w.gamma(frozenset())) ** consts.alpha0
        visit((), base, 1)

    active: set[CoordSet] = {frozenset()}
    for u in n_prime:
        items = sorted(u)
        for k in range(1, len(items) + 1):
            active.update(frozenset(cmb) for cmb in combinations(items, k))
    if len(active) > MAX_ACTIVE_SETS:
        raise PlanningError("active-set closure exceeded the hard cap")
    alloc: dict[CoordSet, int] = {}
    for u in active:
        n = max(1, n_prime.get(u, 0))
        if u and template.kind == INTERLACED_PLR:
            n = _round_up_power(n, template.b)
        alloc[u] = 1 if not u else n
    return Plan(consts, alloc, template, w.descriptor() if _has_descriptor(w) else {})


def _has_descriptor(w: WeightModel) -> bool:
    try:
        w.descriptor()
        return True
    except Exception:
        return False


# --- execution -------------------------------------------------------------


@dataclass
class CostLedger:
    dollar: CostModel
    per_u: dict[CoordSet, float] = field(default_factory=dict)

    @property
    def total(self) -> float:
        return math.fsum(self.per_u.values())

    def charge(self, u: CoordSet, n: int):
        self.per_u[u] = n * 2 ** len(u) * self.dollar(len(u))


def plan_cost(plan: Plan, dollar: CostModel) -> float:
    return math.fsum(
        n * 2 ** len(u) * dollar(len(u)) for u, n in plan.allocations.items()
    )


def epsilon_dimension(plan: Plan) -> int:
    return max(len(u) for u in plan.allocations)


def diagnostics_B(plan: Plan) -> float:
    """max over active u and w subseteq u of the variance-assumption factor
    F_w(n_u) = (1 + ln(n+1)/(|w|-1)^a2)^(a1 (|w|-1)^a2) for |w| >= 2;
    identically 1 for alpha1 = 0 (the case of both built-in rules)."""
    a1, a2 = plan.template.alpha1, plan.template.alpha2
    if a1 == 0:
        return 1.0
    best = 1.0
    for u, n in plan.allocations.items():
        for size in range(2, len(u) + 1):
            e = (size - 1) ** a2
            best = max(best, (1 + math.log(n + 1) / e) ** (a1 * e))
    return best


def cd_estimate(
    f: BlackBoxIntegrand,
    plan: Plan,
    master_seed: int,
    dollar: CostModel | None = None,
) -> tuple[float, CostLedger]:
    """Run the plan: sum over active u of an independent randomized rule
    applied to the anchored component f_{u,a}."""
    dollar = dollar or cost_model("linear")
    ledger = CostLedger(dollar)
    anchor = plan.constants.anchor
    tpl = plan.template
    terms = []
    for u, n in sorted(plan.allocations.items(), key=lambda kv: (len(kv[0]), sorted(kv[0]))):
        ledger.charge(u, n)
        if not u:
            terms.append(float(f({}, anchor)))
            continue
        coords = tuple(sorted(u))
        spec = RuleSpec(tpl.kind, coords, n, seed=derive_seed(master_seed, "rule", u),
                        alpha=tpl.alpha, b=tpl.b)

        def g(pts, coords=coords, u=u):
            x = {j: pts[:, i] for i, j in enumerate(coords)}
            try:
                return anchored_component(f, u, anchor, x)
            except Exception as exc:
                raise RuntimeError(f"integrand failed on subset {sorted(u)}") from exc

        terms.append(run_rule(spec, g))
    return math.fsum(terms), ledger


def cd_estimate_many(
    f: BlackBoxIntegrand,
    plan: Plan,
    master_seeds,
    dollar: CostModel | None = None,
) -> tuple["np.ndarray", CostLedger]:
    """cd_estimate under many master seeds; entry i is bit-identical to
    cd_estimate(f, plan, master_seeds[i]).  Batches the per-u scrambles
    across seeds, which is what makes replicated studies affordable."""
    import numpy as np

    dollar = dollar or cost_model("linear")
    ledger = CostLedger(dollar)
    anchor = plan.constants.anchor
    tpl = plan.template
    seeds = [int(s) for s in master_seeds]
    terms = []
    for u, n in sorted(plan.allocations.items(), key=lambda kv: (len(kv[0]), sorted(kv[0]))):
        ledger.charge(u, n)
        if not u:
            terms.append(np.full(len(seeds), float(f({}, anchor))))
            continue
        coords = tuple(sorted(u))
        spec = RuleSpec(tpl.kind, coords, n, seed=0, alpha=tpl.alpha, b=tpl.b)
        rule_seeds = [derive_seed(s, "rule", u) for s in seeds]

        def g(pts, coords=coords, u=u):
            x = {j: pts[:, i] for i, j in enumerate(coords)}
            try:
                return anchored_component(f, u, anchor, x)
            except Exception as exc:
                raise RuntimeError(f"integrand failed on subset {sorted(u)}") from exc

        terms.append(run_rule_seeds(spec, g, rule_seeds))
    cols = np.stack(terms, axis=1)
    return np.array([math.fsum(row) for row in cols]), ledger
