"""Experiment harness: analytic test integrands, convergence and variance
studies with rate fitting, and exact point dumps.

The test-integrand bank is built from products of the Bernoulli polynomial
B_2/2, which has zero mean on [0,1], so every component is an explicit ANOVA
term and the integral of the whole function is just the constant coefficient.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .cdalg import (
    CostModel,
    Plan,
    PlannerConstants,
    RuleTemplate,
    cd_estimate_many,
    cost_model,
    diagnostics_B,
    epsilon_dimension,
    plan_build,
    plan_cost,
)
from .decomp import Anchor, BlackBoxIntegrand, bias_squared
from .kernels import bernoulli, kernel_diag
from .lattice import GeneratingVector, plr_points
from .prf import derive_seed
from .quadrature import (
    INTERLACED_PLR,
    MONTE_CARLO,
    RuleSpec,
    default_generating_vector,
    empirical_variance,
)
from .scramble import ScrambledRule, interlace_digit_matrices, numerators_to_digits
from .weights import (
    ExplicitWeights,
    FiniteIntersectionWeights,
    FiniteProductWeights,
    ProductWeights,
    Truncation,
    WeightModel,
    disjoint_pair_weights,
)

__all__ = [
    "BankFunction",
    "ExperimentConfig",
    "StudyResult",
    "bank_preset",
    "bank_from_weights",
    "weight_preset",
    "run_convergence_study",
    "run_variance_study",
    "eps_grid_for_costs",
    "dump_points",
    "ols_slope",
    "selftest",
]

# squared norm of B_2(x)/2 per coordinate factor in the smoothness-1 space:
# the component has zero mean and derivative B_1, and int B_1^2 = 1/12
_ETA_NORM2 = 1.0 / 12.0


def _eta(x):
    return bernoulli(2, x) / 2.0


def _normalize_coeffs(coeffs: Mapping) -> dict[frozenset, float]:
    out = {}
    for u, c in coeffs.items():
        key = frozenset(int(j) for j in u)
        if any(j < 1 for j in key):
            raise ValueError("coordinate labels start at 1")
        out[key] = float(c)
    return out


def _bank_eval(coeffs: Mapping[frozenset, float], assignment: Mapping, anchor_value):
    total = coeffs.get(frozenset(), 0.0)
    for u, c in coeffs.items():
        if not u:
            continue
        term = c
        for j in sorted(u):
            xj = assignment.get(j, anchor_value)
            term = term * _eta(np.asarray(xj, dtype=float) if hasattr(xj, "__len__") else xj)
        total = total + term
    return total


@dataclass(frozen=True)
class BankFunction:
    """Test integrand f = sum_u c_u prod_{j in u} B_2(x_j)/2 with exact
    integral c_empty; every component is mean-zero per active coordinate."""

    name: str
    coeffs: dict

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _normalize_coeffs(self.coeffs))
        self._validate()

    @property
    def integral(self) -> float:
        return self.coeffs.get(frozenset(), 0.0)

    @property
    def active(self) -> tuple[int, ...]:
        return tuple(sorted(set().union(*self.coeffs.keys()))) if self.coeffs else ()

    def component_norms(self) -> dict[frozenset, float]:
        """Squared component norms in the smoothness-1 unanchored space."""
        return {u: c * c * _ETA_NORM2 ** len(u) for u, c in self.coeffs.items()}

    def evaluate(self, assignment: Mapping, anchor_value=0.5):
        return _bank_eval(self.coeffs, assignment, anchor_value)

    def integrand(self) -> BlackBoxIntegrand:
        coeffs = self.coeffs

        def anchored(u, assignment, av):
            # for a sum of products the u-anchored component collapses to
            # (sum over v containing u of c_v eta(a)^{|v|-|u|}) times
            # prod_{j in u} (eta(x_j) - eta(a))
            eta_a = float(_eta(av))
            coef = math.fsum(
                c * eta_a ** (len(v) - len(u))
                for v, c in coeffs.items() if u <= v
            )
            term = coef
            for j in sorted(u):
                term = term * (_eta(assignment[j]) - eta_a)
            return term

        return BlackBoxIntegrand(
            evaluator=lambda assignment, av: _bank_eval(coeffs, assignment, av),
            declared_active=frozenset(self.active),
            known_integral=self.integral,
            anchored=anchored,
        )

    def plan_bias(self, Q, anchor_value: float = 0.5) -> float:
        """Exact bias of a changing dimension estimator with active family Q:
        I(f) minus the sum of anchored-component integrals over Q."""
        eta_a = float(_eta(anchor_value))
        Q = {frozenset(q) for q in Q}
        cand = set()
        for z in self.coeffs:
            zs = sorted(z)
            for r in range(len(zs) + 1):
                cand.update(map(frozenset, itertools.combinations(zs, r)))
        # I(f_{v,a}) = (-eta_a)^{|v|} sum_{z >= v} c_z eta_a^{|z|-|v|}
        return math.fsum(
            (-eta_a) ** len(v) * math.fsum(
                c * eta_a ** (len(z) - len(v))
                for z, c in self.coeffs.items() if v <= z
            )
            for v in cand if v not in Q
        )

    def on_points(self, coords: Sequence[int]) -> Callable[[np.ndarray], np.ndarray]:
        """Vectorized f over an (n, len(coords)) point array."""
        coords = tuple(coords)

        def g(pts: np.ndarray) -> np.ndarray:
            x = {j: pts[:, i] for i, j in enumerate(coords)}
            return np.asarray(_bank_eval(self.coeffs, x, 0.5), dtype=float)

        return g

    def _validate(self, tol: float = 1e-10):
        # brute-force check of the analytic integral on the active cube;
        # above 4 active coordinates, check a 4-variable restriction instead
        active = self.active
        nodes, wts = np.polynomial.legendre.leggauss(6)
        nodes = (nodes + 1) / 2
        wts = wts / 2
        if len(active) <= 4:
            v = active
            expected = self.integral
        else:
            v = active[:4]
            rest = frozenset(active) - frozenset(v)
            eta_a = float(_eta(0.5))
            expected = math.fsum(
                c * eta_a ** len(u)
                for u, c in self.coeffs.items()
                if not (u & frozenset(v))
            )
        if not v:
            got = self.coeffs.get(frozenset(), 0.0)
        else:
            grids = np.meshgrid(*([nodes] * len(v)), indexing="ij")
            wgrids = np.meshgrid(*([wts] * len(v)), indexing="ij")
            x = {j: grids[i].ravel() for i, j in enumerate(v)}
            weight = np.prod([w.ravel() for w in wgrids], axis=0)
            vals = np.asarray(_bank_eval(self.coeffs, x, 0.5), dtype=float)
            got = float(np.sum(vals * weight))
        if abs(got - expected) > tol:
            raise ValueError(
                f"bank function {self.name!r}: quadrature check failed "
                f"({got} vs {expected})"
            )


def bank_from_weights(w: WeightModel, max_index: int = 8, max_order: int = 3,
                      name: str = "weights") -> BankFunction:
    """Bank function whose coefficients follow the weight model: c_u = gamma_u
    over a finite enumeration of the support, plus a unit constant."""
    coeffs: dict = {frozenset(): 1.0}
    if w.has_finite_support():
        for u in w.support_closure():
            if u and w.gamma(u) > 0:
                coeffs[u] = w.gamma(u)
    else:
        pool = range(1, max_index + 1)
        for k in range(1, max_order + 1):
            for u in itertools.combinations(pool, k):
                g = w.gamma(frozenset(u))
                if g > 0:
                    coeffs[frozenset(u)] = g
    return BankFunction(name, coeffs)


_BANK_PRESETS: dict[str, Callable[[], BankFunction]] = {
    "constant": lambda: BankFunction("constant", {frozenset(): 1.0}),
    "single": lambda: BankFunction("single", {frozenset({1}): 1.0}),
    "orthogonal2": lambda: BankFunction(
        "orthogonal2", {frozenset({1}): 1.0, frozenset({2}): 1.0}
    ),
    "pair": lambda: BankFunction(
        "pair",
        {frozenset(): 1.0, frozenset({1}): 1.0, frozenset({2}): 0.7,
         frozenset({1, 2}): 0.5},
    ),
}


def bank_preset(spec) -> BankFunction:
    """Resolve a bank function from a preset name or a config mapping."""
    if isinstance(spec, BankFunction):
        return spec
    if isinstance(spec, str):
        try:
            return _BANK_PRESETS[spec]()
        except KeyError:
            raise KeyError(f"unknown bank preset {spec!r}") from None
    spec = dict(spec)
    name = spec.pop("preset")
    if name == "weights":
        w = weight_preset(spec.pop("weights"))
        return bank_from_weights(w, **spec)
    if name == "explicit":
        coeffs = {_parse_coordset(k): float(v) for k, v in spec["coeffs"].items()}
        return BankFunction(spec.get("name", "explicit"), coeffs)
    if spec:
        raise KeyError(f"unexpected bank options {sorted(spec)} for preset {name!r}")
    return bank_preset(name)


def _parse_coordset(key: str) -> frozenset:
    key = key.strip()
    if not key or key in ("()", "{}", "empty"):
        return frozenset()
    return frozenset(int(t) for t in key.replace("{", "").replace("}", "").split(","))


def weight_preset(spec) -> WeightModel:
    """Resolve a weight model from a config mapping like
    {"preset": "product-poly", "a": 3.0}."""
    if isinstance(spec, WeightModel):
        return spec
    if isinstance(spec, str):
        spec = {"preset": spec}
    spec = dict(spec)
    name = spec.pop("preset")
    if name == "product-poly":
        return ProductWeights.polynomial(spec.get("a", 3.0), spec.get("c", 1.0))
    if name == "finite-product-poly":
        return FiniteProductWeights.polynomial(
            spec.get("order", 2), spec.get("a", 3.0), spec.get("c", 1.0)
        )
    if name == "disjoint-pairs":
        return disjoint_pair_weights(spec.get("a", 3.0), spec.get("count", 50))
    if name == "explicit":
        table = {_parse_coordset(k): float(v) for k, v in spec["table"].items()}
        return ExplicitWeights(table)
    raise KeyError(f"unknown weight preset {name!r}")


@dataclass
class ExperimentConfig:
    """One study: which weights/bank, which rule, which grid, how many reps."""

    weights: dict = field(default_factory=lambda: {"preset": "product-poly", "a": 3.0})
    bank: object | None = None  # None -> derived from weights
    chi: int = 1
    alpha: int = 2
    base: int = 2
    rule: str = INTERLACED_PLR
    cost: str = "linear"
    cost_params: dict = field(default_factory=dict)
    tau: float = 2.5
    eps_grid: tuple[float, ...] | None = None
    n_grid: tuple[int, ...] | None = None
    reps: int = 50
    seed: int = 0
    out: str | None = None

    def __post_init__(self):
        if self.reps < 2:
            raise ValueError("need at least 2 replications")
        if self.rule not in (INTERLACED_PLR, MONTE_CARLO):
            raise ValueError(f"unknown rule kind {self.rule!r}")
        # fail fast on bad preset names
        weight_preset(self.weights)
        if self.bank is not None:
            bank_preset(self.bank)
        cost_model(self.cost, **self.cost_params)

    def resolve_weights(self) -> WeightModel:
        return weight_preset(self.weights)

    def resolve_bank(self) -> BankFunction:
        if self.bank is not None:
            return bank_preset(self.bank)
        return bank_from_weights(self.resolve_weights())

    def to_jsonable(self) -> dict:
        d = asdict(self)
        if isinstance(self.bank, BankFunction):
            d["bank"] = {
                "preset": "explicit",
                "name": self.bank.name,
                "coeffs": {",".join(map(str, sorted(u))): c
                           for u, c in self.bank.coeffs.items()},
            }
        return d


def ols_slope(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope of y on x with its standard error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2:
        raise ValueError("need at least two points to fit a slope")
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ y) / sxx
    resid = y - y.mean() - slope * xc
    dof = len(x) - 2
    se = math.sqrt(float(resid @ resid) / dof / sxx) if dof > 0 else float("nan")
    return slope, se


@dataclass
class StudyResult:
    kind: str
    rows: list[dict]
    slope: float
    slope_stderr: float
    config: ExperimentConfig

    def write(self, path: str | Path):
        """CSV table plus a JSON metadata sidecar; byte-stable per seed."""
        path = Path(path)
        fieldnames = list(self.rows[0].keys())
        with path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fieldnames)
            writer.writeheader()
            writer.writerows(self.rows)
        meta = {
            "kind": self.kind,
            "slope": self.slope,
            "slope_stderr": self.slope_stderr,
            "config": self.config.to_jsonable(),
            "version": _version(),
        }
        path.with_suffix(path.suffix + ".meta.json").write_text(
            json.dumps(meta, indent=2, sort_keys=True) + "\n"
        )


def _version() -> str:
    try:
        from importlib.metadata import version

        return version("cdquad")
    except Exception:
        return "unknown"


def run_convergence_study(cfg: ExperimentConfig) -> StudyResult:
    """RMSE vs cost across the eps grid: plan, replicate the changing
    dimension estimator under R master seeds, compare against the analytic
    integral, and fit the log-log slope."""
    if not cfg.eps_grid:
        raise ValueError("convergence study needs an eps grid")
    w = cfg.resolve_weights()
    bank = cfg.resolve_bank()
    f = bank.integrand()
    tpl = RuleTemplate(kind=cfg.rule, alpha=cfg.alpha, b=cfg.base)
    dollar = cost_model(cfg.cost, **cfg.cost_params)
    anchor = Anchor()
    k_aa = kernel_diag(cfg.chi, anchor.value)
    rows = []
    for eps in cfg.eps_grid:
        consts = PlannerConstants.for_weights(w, eps, cfg.tau, chi=cfg.chi)
        plan = plan_build(w, consts, tpl)
        cost = plan_cost(plan, dollar)
        seeds = [derive_seed(cfg.seed, "study", f"{eps:.12e}", r)
                 for r in range(cfg.reps)]
        ests, _ = cd_estimate_many(f, plan, seeds, dollar)
        err2 = (ests - bank.integral) ** 2
        rmse2 = float(err2.mean())
        stderr = float(err2.std(ddof=1)) / math.sqrt(cfg.reps)
        bound = float(bias_squared(plan.Q, w, k_aa, Truncation()))
        b2 = bank.plan_bias(plan.Q, anchor.value) ** 2
        rows.append({
            "eps": eps,
            "q_size": len(plan.Q),
            "d_eps": epsilon_dimension(plan),
            "plan_cost": cost,
            "rmse2": rmse2,
            "rmse": math.sqrt(rmse2),
            "stderr_rmse2": stderr,
            "bias2": b2,
            "bias2_bound": bound,
            "B": diagnostics_B(plan),
        })
    usable = [(r["plan_cost"], r["rmse2"]) for r in rows if r["rmse2"] > 0]
    if len(usable) >= 2:
        slope, se = ols_slope(
            [math.log(c) for c, _ in usable], [math.log(v) for _, v in usable]
        )
    else:
        slope, se = float("nan"), float("nan")
    result = StudyResult("convergence", rows, slope, se, cfg)
    if cfg.out:
        result.write(cfg.out)
    return result


def run_variance_study(cfg: ExperimentConfig) -> StudyResult:
    """Variance of a single randomized rule vs n on the bank function's
    active coordinates; the Monte Carlo kind gives the slope -1 baseline."""
    if not cfg.n_grid:
        raise ValueError("variance study needs an n grid")
    bank = cfg.resolve_bank()
    coords = bank.active
    if not coords:
        raise ValueError("bank function has no active coordinates")
    g = bank.on_points(coords)
    rows = []
    for n in cfg.n_grid:
        spec = RuleSpec(cfg.rule, coords, int(n),
                        seed=derive_seed(cfg.seed, "var", int(n)),
                        alpha=cfg.alpha, b=cfg.base)
        est = empirical_variance(spec, g, cfg.reps)
        rows.append({
            "n": int(n),
            "mean": est.mean,
            "variance": est.variance,
            "stderr_mean": est.stderr_mean,
            "stderr_variance": est.stderr_variance,
        })
    slope, se = ols_slope(
        [math.log(r["n"]) for r in rows],
        [math.log(r["variance"]) for r in rows],
    )
    result = StudyResult("variance", rows, slope, se, cfg)
    if cfg.out:
        result.write(cfg.out)
    return result


def eps_grid_for_costs(
    w: WeightModel,
    targets: Sequence[float],
    tau: float,
    chi: int = 1,
    template: RuleTemplate | None = None,
    dollar: CostModel | None = None,
    lo: float = 1e-8,
    hi: float = 100.0,
) -> list[float]:
    """For each target cost, bisect (in log eps) for the accuracy whose plan
    costs roughly that much.  Plan cost is nonincreasing in eps."""
    template = template or RuleTemplate()
    dollar = dollar or cost_model("linear")

    def cost_at(eps: float) -> float:
        from .cdalg import PlanningError

        consts = PlannerConstants.for_weights(w, eps, tau, chi=chi)
        try:
            return plan_cost(plan_build(w, consts, template), dollar)
        except PlanningError:
            # enumeration cap means the plan is far bigger than any target
            return math.inf

    out = []
    for target in targets:
        a, b_ = math.log(lo), math.log(hi)
        if cost_at(math.exp(b_)) >= target:
            out.append(math.exp(b_))
            continue
        for _ in range(40):
            mid = (a + b_) / 2
            if cost_at(math.exp(mid)) >= target:
                a = mid
            else:
                b_ = mid
        out.append(math.exp((a + b_) / 2))
    return out


def dump_points(
    b: int,
    m: int,
    s: int,
    alpha: int = 1,
    seed: int | None = None,
    gv: GeneratingVector | None = None,
) -> list[str]:
    """Emit the (interlaced, scrambled) point set as exact base-b digit
    strings, one point per line, coordinates space-separated.  seed=None
    means identity scramble (the raw interlaced net)."""
    if gv is None:
        gv = default_generating_vector(b, m, s * alpha, alpha)
    if gv.s != s * alpha:
        raise ValueError(f"generating vector has {gv.s} components, need {s * alpha}")
    nums = plr_points(gv).coords
    if seed is None:
        streams = np.stack(
            [numerators_to_digits(nums[:, u], b, m) for u in range(s * alpha)]
        )
        per_out = np.stack(
            [interlace_digit_matrices(streams[j * alpha:(j + 1) * alpha])
             for j in range(s)],
            axis=1,
        )  # (n, s, alpha*m)
    else:
        rule = ScrambledRule(b, m, nums, alpha, seed)
        per_out = rule.digit_matrices(0)
    lines = [f"# b={b} m={m} s={s} alpha={alpha} seed={seed}"]
    for point in per_out:
        lines.append(" ".join("".join(str(int(d)) for d in coord) for coord in point))
    return lines


def selftest(verbose: bool = True) -> bool:
    """Fast invariant suite for the CLI; returns True when everything holds."""
    from fractions import Fraction

    from .decomp import alt_sum_S, anchored_component, downward_closure
    from .gfpoly import FieldBase, poly_from_int
    from .lattice import GeneratingVector as GV, irreducible_modulus

    checks: list[tuple[str, bool]] = []

    # one-dimensional projections of a PLR are {i/b^m}
    ok = True
    for bb in (2, 3):
        for mm in (1, 2, 3):
            base = FieldBase(bb)
            gvec = GV(base, mm, irreducible_modulus(bb, mm), (poly_from_int(1, base),))
            vals = sorted(plr_points(gvec).values()[:, 0])
            ok &= np.allclose(vals, [i / bb**mm for i in range(bb**mm)])
    checks.append(("plr 1-d projections", ok))

    # worked dump example
    lines = dump_points(2, 2, 1, gv=GeneratingVector(
        FieldBase(2), 2, irreducible_modulus(2, 2), (poly_from_int(1, FieldBase(2)),)))
    checks.append(("dump worked example", lines[1:] == ["00", "01", "11", "10"]))

    # alternating sums vanish on downward closed families
    q = downward_closure({frozenset({1, 2}), frozenset({3})})
    ok = all(alt_sum_S(q, u) == 0 for u in q if u)
    checks.append(("alternating sum vanishes", ok))

    # anchored decomposition completeness on a small bank function
    bank = bank_preset("pair")
    f = bank.integrand()
    a = Anchor()
    x = {1: 0.3, 2: 0.8}
    total = math.fsum(
        float(anchored_component(f, u, a, x))
        for u in [frozenset(), frozenset({1}), frozenset({2}), frozenset({1, 2})]
    )
    checks.append(("decomposition completeness", abs(total - float(f(x, a))) < 1e-12))

    # constant function integrates exactly under any plan
    cfg = ExperimentConfig(
        weights={"preset": "explicit", "table": {"1": 0.5}},
        bank="constant", eps_grid=(0.5,), reps=5, alpha=2,
    )
    res = run_convergence_study(cfg)
    checks.append(("constant bank rmse 0", res.rows[0]["rmse2"] == 0.0))

    all_ok = all(ok for _, ok in checks)
    if verbose:
        for name, ok in checks:
            print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return all_ok
