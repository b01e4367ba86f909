"""Unbiased randomized building-block rules.

Two kinds: plain Monte Carlo, and interlaced scrambled polynomial lattice
rules.  Both use equal weights 1/n and per-coordinate randomization streams,
so a rule's coordinate j depends only on its own randomness — the structural
property that lets variance split along the ANOVA decomposition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .gfpoly import FieldBase
from .lattice import GeneratingVector, plr_points, search_generating_vector
from .prf import counters_uniform, derive_seed, mix64_array
from .scramble import ScrambledRule

_COORD = 0x94D049BB133111EB
_MASK64 = 0xFFFFFFFFFFFFFFFF


def _single_uniform(base_keys: np.ndarray, d: int) -> np.ndarray:
    """The n = 1 degenerate rule: one uniform point per key, shape (R, 1, d).

    Distributionally this is the Owen scramble of the zero point; drawing the
    53 output bits in one PRF call keeps plans with thousands of singleton
    allocations affordable.
    """
    consts = np.array([(_COORD * (j + 1)) & _MASK64 for j in range(d)], dtype=np.uint64)
    bits = mix64_array(np.asarray(base_keys, np.uint64)[:, None] ^ consts[None, :])
    return ((bits >> np.uint64(11)).astype(np.float64) * 2.0**-53)[:, None, :]

MONTE_CARLO = "mc"
INTERLACED_PLR = "plr"


@dataclass(frozen=True)
class RuleSpec:
    """An executable randomized rule on the coordinates in u.

    alpha1/alpha2 carry the variance-assumption metadata F_w(n); both rule
    kinds implemented here satisfy it with alpha1 = 0, i.e. F identically 1.
    """

    kind: str
    u: tuple[int, ...]
    n: int
    seed: int
    alpha: int = 1
    b: int = 2
    gv: GeneratingVector | None = None
    alpha1: float = 0.0
    alpha2: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "u", tuple(sorted(set(self.u))))
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.kind not in (MONTE_CARLO, INTERLACED_PLR):
            raise ValueError(f"unknown rule kind {self.kind!r}")
        if self.kind == INTERLACED_PLR:
            m = round(math.log(self.n, self.b))
            if self.b**m != self.n:
                raise ValueError("PLR rules need n = b^m")
            if self.gv is not None and self.gv.s != self.alpha * len(self.u):
                raise ValueError("generating vector dimension must be alpha * |u|")

    @property
    def m(self) -> int:
        return round(math.log(self.n, self.b))


@lru_cache(maxsize=512)
def default_generating_vector(b: int, m: int, s: int, alpha: int) -> GeneratingVector:
    """Cached CBC vector for rules that don't bring their own."""
    return search_generating_vector(s, m, FieldBase(b), alpha=alpha)


def rule_points(spec: RuleSpec, rep=None) -> np.ndarray:
    """The randomized point array of a rule, shape (n, |u|).

    rep = None uses the spec's seed directly; an integer array of replication
    indices prepends an axis of independent randomizations (shared spec seed,
    split per replication).
    """
    d = len(spec.u)
    reps = np.atleast_1d(np.asarray(rep if rep is not None else 0))
    scalar = rep is None or np.asarray(rep).ndim == 0
    if d == 0:
        out = np.empty((len(reps), spec.n, 0))
        return out[0] if scalar else out
    if spec.kind == MONTE_CARLO:
        out = np.empty((len(reps), spec.n, d))
        for i, r in enumerate(reps):
            for jpos, j in enumerate(spec.u):
                key = derive_seed(spec.seed, "mc", int(r), j)
                out[i, :, jpos] = counters_uniform(key, spec.n)
        return out[0] if scalar else out
    if spec.n == 1:
        keys = np.array(
            [derive_seed(derive_seed(spec.seed, "plr", spec.u), "rep", int(r)) for r in reps],
            dtype=np.uint64,
        )
        out = _single_uniform(keys, d)
        return out[0] if scalar else out
    gv = spec.gv or default_generating_vector(spec.b, spec.m, d * spec.alpha, spec.alpha)
    # key the scramble by the coordinate labels so an identical seed yields
    # the same per-coordinate randomness regardless of which rule asks
    rule = ScrambledRule(spec.b, spec.m, plr_points(gv).coords, spec.alpha,
                         derive_seed(spec.seed, "plr", spec.u))
    out = rule.replicate(reps)
    return out[0] if scalar else out


def rule_points_seeds(spec: RuleSpec, seeds) -> np.ndarray:
    """Point arrays for the same rule under distinct seeds, shape (R, n, d).

    Row i is bit-identical to rule_points(spec with seed=seeds[i]); the PLR
    path batches all scrambles into one pass.
    """
    seeds = [int(s) for s in seeds]
    d = len(spec.u)
    if spec.kind == MONTE_CARLO or d == 0:
        rows = [rule_points(RuleSpec(spec.kind, spec.u, spec.n, s, spec.alpha,
                                     spec.b, spec.gv)) for s in seeds]
        return np.stack(rows) if rows else np.empty((0, spec.n, d))
    base_keys = np.array(
        [derive_seed(derive_seed(s, "plr", spec.u), "rep", 0) for s in seeds],
        dtype=np.uint64,
    )
    if spec.n == 1:
        return _single_uniform(base_keys, d)
    gv = spec.gv or default_generating_vector(spec.b, spec.m, d * spec.alpha, spec.alpha)
    rule = ScrambledRule(spec.b, spec.m, plr_points(gv).coords, spec.alpha, 0)
    return rule.replicate_keys(base_keys)


def run_rule(spec: RuleSpec, g: Callable[[np.ndarray], np.ndarray]) -> float:
    """(1/n) sum of g over the rule's points; deterministic given the spec."""
    pts = rule_points(spec)
    vals = np.asarray(g(pts), dtype=np.float64)
    if vals.shape != (spec.n,):
        vals = np.broadcast_to(vals, (spec.n,))
    return float(np.mean(vals))


@dataclass(frozen=True)
class VarianceEstimate:
    mean: float
    variance: float
    stderr_mean: float
    stderr_variance: float
    replications: int

    def __float__(self):
        return self.variance


def run_rule_seeds(spec: RuleSpec, g, seeds) -> np.ndarray:
    """run_rule under many seeds at once; entry i is bit-identical to
    run_rule(spec with seed=seeds[i]).

    g is called once on all R*n points stacked, so pointwise integrands pay
    Python call overhead per rule rather than per replication."""
    pts = rule_points_seeds(spec, seeds)
    R = len(pts)
    flat = pts.reshape(R * spec.n, len(spec.u))
    vals = np.asarray(g(flat), dtype=np.float64)
    vals = np.broadcast_to(vals, (R * spec.n,))
    return vals.reshape(R, spec.n).mean(axis=1)


def run_rule_batch(spec: RuleSpec, g, reps: np.ndarray) -> np.ndarray:
    """Estimates for many independent randomizations of one rule."""
    pts = rule_points(spec, reps)
    out = np.empty(len(reps))
    for i in range(len(reps)):
        vals = np.asarray(g(pts[i]), dtype=np.float64)
        out[i] = np.mean(np.broadcast_to(vals, (spec.n,)))
    return out


def empirical_variance(spec: RuleSpec, g, replications: int) -> VarianceEstimate:
    """Sample variance over independent randomizations, with a jackknife
    standard error on the variance itself."""
    if replications < 2:
        raise ValueError("need at least 2 replications")
    ests = run_rule_batch(spec, g, np.arange(replications))
    R = replications
    mean = float(np.mean(ests))
    var = float(np.var(ests, ddof=1))
    # leave-one-out variances in O(R) from the moment identities
    loo_mean = (R * mean - ests) / (R - 1)
    ss = float(np.sum((ests - mean) ** 2))
    loo_ss = ss - (ests - mean) ** 2 * R / (R - 1)
    loo_var = loo_ss / (R - 2) if R > 2 else np.zeros(R)
    se_var = math.sqrt((R - 1) / R * float(np.sum((loo_var - np.mean(loo_var)) ** 2)))
    se_mean = math.sqrt(var / R)
    return VarianceEstimate(mean, var, se_mean, se_var, R)
