"""Command line entry point.

Subcommands: plan (print an allocation plan), estimate (one changing
dimension run on a bank function), study (convergence or variance table),
points (exact digit dump of a point set), selftest (fast invariant suite).
A JSON config file can supply any ExperimentConfig field; flags override it.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .cdalg import (
    PlannerConstants,
    RuleTemplate,
    cd_estimate,
    cost_model,
    epsilon_dimension,
    plan_build,
    plan_cost,
)
from .harness import (
    ExperimentConfig,
    bank_preset,
    dump_points,
    run_convergence_study,
    run_variance_study,
    selftest,
    weight_preset,
)
from .quadrature import INTERLACED_PLR, MONTE_CARLO


def _parse_spec(text: str) -> dict:
    """'product-poly,a=3' or a JSON object -> preset mapping."""
    text = text.strip()
    if text.startswith("{"):
        return json.loads(text)
    head, *opts = text.split(",")
    spec: dict = {"preset": head}
    for opt in opts:
        k, _, v = opt.partition("=")
        try:
            spec[k] = json.loads(v)
        except json.JSONDecodeError:
            spec[k] = v
    return spec


def _parse_grid(text: str, cast) -> tuple:
    return tuple(cast(t) for t in text.split(",") if t.strip())


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file with ExperimentConfig fields")
    p.add_argument("--weights", help="weight preset, e.g. product-poly,a=3")
    p.add_argument("--bank", help="bank preset, e.g. single or weights")
    p.add_argument("--chi", type=int)
    p.add_argument("--alpha", type=int, help="interlacing factor")
    p.add_argument("--base", type=int, help="digit base b")
    p.add_argument("--rule", choices=[INTERLACED_PLR, MONTE_CARLO])
    p.add_argument("--cost", help="cost model: linear, power, exp")
    p.add_argument("--tau", type=float)
    p.add_argument("--eps-grid", help="comma separated accuracies")
    p.add_argument("--n-grid", help="comma separated point counts")
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output CSV path (JSON sidecar alongside)")


def _config_from(args: argparse.Namespace) -> ExperimentConfig:
    fields: dict = {}
    if args.config:
        fields.update(json.loads(Path(args.config).read_text()))
    overrides = {
        "chi": args.chi, "alpha": args.alpha, "base": args.base,
        "rule": args.rule, "tau": args.tau, "reps": args.reps,
        "seed": args.seed, "out": args.out,
    }
    if args.weights:
        overrides["weights"] = _parse_spec(args.weights)
    if args.bank:
        overrides["bank"] = _parse_spec(args.bank) if "," in args.bank or args.bank.startswith("{") else args.bank
    if args.cost:
        spec = _parse_spec(args.cost)
        overrides["cost"] = spec.pop("preset")
        overrides["cost_params"] = spec
    if args.eps_grid:
        overrides["eps_grid"] = _parse_grid(args.eps_grid, float)
    if args.n_grid:
        overrides["n_grid"] = _parse_grid(args.n_grid, int)
    fields.update({k: v for k, v in overrides.items() if v is not None})
    if "eps_grid" in fields and fields["eps_grid"] is not None:
        fields["eps_grid"] = tuple(fields["eps_grid"])
    if "n_grid" in fields and fields["n_grid"] is not None:
        fields["n_grid"] = tuple(fields["n_grid"])
    return ExperimentConfig(**fields)


def _build_plan(cfg: ExperimentConfig, eps: float):
    w = cfg.resolve_weights()
    consts = PlannerConstants.for_weights(w, eps, cfg.tau, chi=cfg.chi)
    tpl = RuleTemplate(kind=cfg.rule, alpha=cfg.alpha, b=cfg.base)
    return plan_build(w, consts, tpl)


def _cmd_plan(args) -> int:
    cfg = _config_from(args)
    if not cfg.eps_grid:
        print("plan: need --eps-grid (one or more accuracies)", file=sys.stderr)
        return 2
    dollar = cost_model(cfg.cost, **cfg.cost_params)
    for eps in cfg.eps_grid:
        plan = _build_plan(cfg, eps)
        print(f"# eps={eps} |Q|={len(plan.Q)} d(eps)={epsilon_dimension(plan)} "
              f"cost={plan_cost(plan, dollar):.6g}")
        if args.full:
            print(plan.to_json())
    return 0


def _cmd_estimate(args) -> int:
    cfg = _config_from(args)
    if not cfg.eps_grid:
        print("estimate: need --eps-grid (one or more accuracies)", file=sys.stderr)
        return 2
    bank = cfg.resolve_bank()
    f = bank.integrand()
    dollar = cost_model(cfg.cost, **cfg.cost_params)
    for eps in cfg.eps_grid:
        plan = _build_plan(cfg, eps)
        est, ledger = cd_estimate(f, plan, cfg.seed, dollar)
        print(f"eps={eps} estimate={est!r} exact={bank.integral!r} "
              f"error={est - bank.integral:.6e} cost={ledger.total:.6g}")
    return 0


def _cmd_study(args) -> int:
    cfg = _config_from(args)
    if cfg.eps_grid and cfg.n_grid:
        print("study: give either --eps-grid or --n-grid, not both", file=sys.stderr)
        return 2
    if cfg.eps_grid:
        res = run_convergence_study(cfg)
    elif cfg.n_grid:
        res = run_variance_study(cfg)
    else:
        print("study: need --eps-grid (convergence) or --n-grid (variance)",
              file=sys.stderr)
        return 2
    cols = list(res.rows[0].keys())
    print("\t".join(cols))
    for row in res.rows:
        print("\t".join(f"{row[c]:.6g}" if isinstance(row[c], float) else str(row[c])
                        for c in cols))
    print(f"# slope = {res.slope:.4f} +/- {res.slope_stderr:.4f}")
    if cfg.out:
        print(f"# wrote {cfg.out} and {cfg.out}.meta.json")
    return 0


def _cmd_points(args) -> int:
    seed = args.seed if args.scramble else None
    lines = dump_points(args.base, args.m, args.s, alpha=args.alpha, seed=seed)
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_selftest(args) -> int:
    return 0 if selftest() else 1


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="cdquad")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="print allocation plans for an eps grid")
    _add_common(p)
    p.add_argument("--full", action="store_true", help="print full plan JSON")
    p.set_defaults(fn=_cmd_plan)

    p = sub.add_parser("estimate", help="one changing dimension estimate")
    _add_common(p)
    p.set_defaults(fn=_cmd_estimate)

    p = sub.add_parser("study", help="convergence or variance table")
    _add_common(p)
    p.set_defaults(fn=_cmd_study)

    p = sub.add_parser("points", help="dump a point set as digit strings")
    p.add_argument("--base", type=int, default=2)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--alpha", type=int, default=1)
    p.add_argument("--scramble", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_points)

    p = sub.add_parser("selftest", help="run the fast invariant suite")
    p.set_defaults(fn=_cmd_selftest)

    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
