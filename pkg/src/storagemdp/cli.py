"""Command-line entry point.

Every subcommand reads a ``.cfg`` run configuration (the bundled default
when ``--config`` is omitted), prints a short summary and writes its
machine-readable results into ``--out-dir``.

Exit status: 0 on success, 1 on invalid input or parameters, 2 when a file
cannot be read or written.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dataio import (
    BUNDLED_PREFIX,
    RunConfig,
    format_timestamp,
    load_series,
    read_policy,
    scenario_from_config,
    write_marginals,
    write_policy,
    write_values,
)
from .evaluation import compare_cases, monte_carlo, rollout
from .market import ObjectiveMode
from .studies import benchmark, capacity_sweep, periodicity_study, solver
from .uncertainty import estimate_chain, sample_path

log = logging.getLogger("storagemdp")

DEFAULT_CONFIG = BUNDLED_PREFIX + "paper_default.cfg"
EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


def _num(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_num(v) for v in row])


def write_json(path: Path, data: dict) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


# -- configuration ---------------------------------------------------------

# command-line option -> RunConfig field
_OVERRIDES = {
    "mode": "mode", "solver": "solver", "n_soc": "n_soc", "start": "start", "stages": "stages",
    "seed": "seed", "workers": "workers", "n_paths": "n_paths", "capacity": "capacity",
    "x_init": "x_init",
}


def load_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.from_file(args.config)
    changes = {}
    for opt, fld in _OVERRIDES.items():
        val = getattr(args, opt, None)
        if val is not None:
            changes[fld] = ObjectiveMode.parse(val) if fld == "mode" else val
    return dataclasses.replace(cfg, **changes)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommands -----------------------------------------------------------


def cmd_estimate(args) -> None:
    cfg = load_config(args)
    path = args.input or cfg.path(cfg.renewable)
    series = load_series(path, cfg.stage_minutes)
    n_bins = args.bins or cfg.n_res
    alpha = cfg.alpha if args.alpha is None else args.alpha
    chain = estimate_chain(series.values, n_bins, alpha)
    out = _out_dir(args) / "chain.json"
    chain.save(out)
    print(f"estimated {chain.n_states}-state chain from {len(series)} observations -> {out}")
    print("bin values:", " ".join(f"{v:.4g}" for v in chain.bin_values))


def cmd_solve(args) -> None:
    cfg = load_config(args)
    inst = scenario_from_config(cfg).instance(cfg.start, cfg.stages)
    res = solver(cfg.solver)(inst)
    out = _out_dir(args)
    write_policy(out / "policy.csv", res.policy)
    write_values(out / "values.csv", res.values)
    summary = {
        "solver": cfg.solver, "mode": inst.mode.value, "stages": inst.T, "n_soc": inst.n_soc,
        "n_res": inst.chain.n_states, "capacity_mwh": inst.spec.capacity, "x_init_mwh": inst.spec.x_init,
        "re_init": inst.re_init, "optimal_value_usd": res.optimal_value,
        "complementarity_violations": res.policy.complementarity_violations(),
        "concavity_violation": res.values.concavity_violation(),
    }
    if cfg.solver == "threshold":
        write_marginals(out / "marginals.csv", inst.grid.levels, res.marginals)
        summary["marginal_clip"] = res.max_clip
    write_json(out / "solve.json", summary)
    print(f"{cfg.solver} {inst.mode.value}: T={inst.T} n_soc={inst.n_soc} optimal value {res.optimal_value:.4f} $")


def cmd_simulate(args) -> None:
    cfg = load_config(args)
    sc = scenario_from_config(cfg)
    inst = sc.instance(cfg.start, cfg.stages)
    out = _out_dir(args)
    policy_path = Path(args.policy) if args.policy else out / "policy.csv"
    policy = read_policy(policy_path, inst.spec.capacity)
    rng = np.random.default_rng(cfg.seed)
    re_path = sample_path(inst.chain, inst.re_init, inst.T, rng)
    noise = inst.forecast.sample(rng, inst.T) if inst.forecast.sigma > 0 else None
    tr = rollout(policy, inst, re_path, price_noise=noise)
    stamps = sc.timestamps[cfg.start:cfg.start + inst.T]
    write_csv(
        out / "trajectory.csv",
        ["t", "timestamp", "x_mwh", "re_index", "re_mwh", "u_mwh", "w_mwh", "p_ante_usd_per_mwh",
         "p_post_usd_per_mwh", "arbitrage_usd", "welfare_usd", "x_next_mwh"],
        (
            [t, format_timestamp(stamps[t]) if stamps else "", tr.x[t], tr.re[t], tr.re_value[t], tr.u[t],
             tr.w[t], tr.p_ante[t], tr.p_post[t], tr.arbitrage[t], tr.welfare[t], tr.x[t + 1]]
            for t in range(tr.T)
        ),
    )
    summary = {"seed": cfg.seed, "path": {"arbitrage_usd": tr.arbitrage_sum, "welfare_usd": tr.welfare_sum,
                                         "total_usd": tr.total}}
    if cfg.n_paths > 1:
        mc = monte_carlo(policy, inst, cfg.n_paths, cfg.seed)
        summary["monte_carlo"] = {
            "n_paths": mc.n_paths, "arbitrage_usd": mc.arbitrage, "welfare_usd": mc.welfare,
            "total_usd": mc.total, "arbitrage_se": mc.arbitrage_se, "welfare_se": mc.welfare_se,
            "total_se": mc.total_se,
        }
    write_json(out / "simulate.json", summary)
    print(f"simulated {tr.T} stages: arbitrage {tr.arbitrage_sum:.4f} $, welfare {tr.welfare_sum:.4f} $, "
          f"total {tr.total:.4f} $")


def cmd_compare(args) -> None:
    cfg = load_config(args)
    inst = scenario_from_config(cfg).instance(cfg.start, cfg.stages)
    n_paths = cfg.n_paths if cfg.n_paths > 1 else 0
    cmp = compare_cases(inst, n_paths=n_paths, seed=cfg.seed)
    out = _out_dir(args)
    rows = [[c.case, c.mode.value, c.planned, c.realized.arbitrage, c.realized.welfare, c.total]
            for c in cmp.cases]
    write_csv(out / "compare.csv",
              ["case", "mode", "planned_usd", "arbitrage_usd", "welfare_usd", "total_usd"], rows)
    write_json(out / "compare.json", {"ordered": bool(cmp.ordered), "n_paths": n_paths,
                                      "totals_usd": {str(c.case): c.total for c in cmp.cases}})
    for r in rows:
        print(f"case {r[0]} {r[1]:<12} planned {r[2]:12.4f}  realized {r[5]:12.4f}")
    print("ordering case3 >= case2 >= case1:", "yes" if cmp.ordered else "NO")


def cmd_benchmark(args) -> None:
    cfg = load_config(args)
    inst = scenario_from_config(cfg).instance(cfg.start, cfg.stages)
    grids = args.grids or cfg.grids
    rep = benchmark(inst, grids, repeats=args.repeats)
    out = _out_dir(args)
    header = ["solver"] + [f"n_soc_{g}" for g in rep.grids]
    write_csv(out / "benchmark_values.csv", header,
              ([s, *rep.values[i]] for i, s in enumerate(rep.solvers)))
    # wall-clock times differ between runs; kept apart from the deterministic values
    write_csv(out / "benchmark_timing.csv", header,
              ([s, *rep.seconds[i]] for i, s in enumerate(rep.solvers)))
    for i, s in enumerate(rep.solvers):
        print(f"{s:<10}", "  ".join(f"n={g}: {t * 1e3:8.2f} ms" for g, t in zip(rep.grids, rep.seconds[i])))
    if len(rep.grids) > 1 and "sdp" in rep.solvers and "threshold" in rep.solvers:
        print(f"time exponent: sdp {rep.exponent('sdp'):.2f}, threshold {rep.exponent('threshold'):.2f}; "
              f"speedup at n={rep.grids[-1]}: {rep.speedup()[-1]:.1f}x")


def cmd_capacity(args) -> None:
    cfg = load_config(args)
    inst = scenario_from_config(cfg).instance(cfg.start, cfg.stages)
    caps = args.capacities or cfg.capacities
    rho = cfg.capital_cost if args.rho is None else args.rho
    plan = capacity_sweep(inst, caps, rho, cfg.solver, cfg.workers, cfg.soc_per_mwh)
    c = plan.curve
    slopes = list(c.slopes) + [float("nan")]
    out = _out_dir(args)
    write_csv(out / "capacity.csv", ["capacity_mwh", "value_usd", "net_value_usd", "slope_to_next"],
              zip(c.capacities, c.values, plan.net_values, slopes))
    write_json(out / "capacity.json", {
        "rho_usd_per_mwh": rho, "c_star_mwh": plan.c_star, "c_star_argmax_mwh": plan.c_star_argmax,
        "c_star_refined_mwh": plan.c_star_refined, "eta_c": c.eta_c, "eta_d": c.eta_d,
        "non_decreasing": c.monotonicity_violation() == 0.0, "max_slope_increase": c.slope_increase(),
    })
    for cap, v in zip(c.capacities, c.values):
        print(f"C={cap:8.3f} MWh  U={v:12.4f} $")
    print(f"rho={rho}: C*={plan.c_star} (refined {plan.c_star_refined:.3f})")


def cmd_periodicity(args) -> None:
    cfg = load_config(args)
    sc = scenario_from_config(cfg)
    periods = args.periodicities or cfg.periodicities
    x_inits = args.x_inits or cfg.x_inits
    st = periodicity_study(sc, periods, x_inits, cfg.stages_per_quarter_day, cfg.solver, cfg.workers,
                           start=cfg.start)
    out = _out_dir(args)
    write_csv(out / "periodicity.csv",
              ["periodicity_stages", "windows"] + [f"x_init_{x:g}" for x in st.x_inits],
              ([T, n, *st.values[i]] for i, (T, n) in enumerate(zip(st.periodicities, st.windows))))
    print("quarter-day value by periodicity (rows) and initial level (columns)")
    for i, T in enumerate(st.periodicities):
        print(f"T={T:4d}", "  ".join(f"{v:10.4f}" for v in st.values[i]))


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=DEFAULT_CONFIG, help="run configuration (default: bundled)")
    common.add_argument("--out-dir", default=".", help="directory for output files")
    common.add_argument("--mode", choices=[m.value for m in ObjectiveMode])
    common.add_argument("--solver", choices=["sdp", "threshold"])
    common.add_argument("--n-soc", type=int, dest="n_soc")
    common.add_argument("--start", type=int)
    common.add_argument("--stages", type=int)
    common.add_argument("--capacity", type=float)
    common.add_argument("--x-init", type=float, dest="x_init")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)

    p = argparse.ArgumentParser(prog="storagemdp", description="Community energy storage scheduling.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("estimate", parents=[common], help="renewable series -> Markov chain JSON")
    s.add_argument("--input", help="renewable CSV (default: from config)")
    s.add_argument("--bins", type=int)
    s.add_argument("--alpha", type=float)
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("solve", parents=[common], help="config -> policy and value tables")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("simulate", parents=[common], help="policy + scenario -> trajectory CSV")
    s.add_argument("--policy", help="policy CSV (default: OUT_DIR/policy.csv)")
    s.add_argument("--n-paths", type=int, dest="n_paths")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("compare", parents=[common], help="price-taker vs profit-max vs welfare-max")
    s.add_argument("--n-paths", type=int, dest="n_paths")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("benchmark", parents=[common], help="solver timing across grid sizes")
    s.add_argument("--grids", type=_ints)
    s.add_argument("--repeats", type=int, default=3)
    s.set_defaults(func=cmd_benchmark)

    s = sub.add_parser("capacity", parents=[common], help="value-capacity curve and optimal capacity")
    s.add_argument("--capacities", type=_floats)
    s.add_argument("--rho", type=float, help="capital cost per MWh over the horizon")
    s.set_defaults(func=cmd_capacity)

    s = sub.add_parser("periodicity", parents=[common], help="value vs periodicity and initial level")
    s.add_argument("--periodicities", type=_ints)
    s.add_argument("--x-inits", type=_floats, dest="x_inits")
    s.set_defaults(func=cmd_periodicity)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; here 2 is reserved for I/O
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
