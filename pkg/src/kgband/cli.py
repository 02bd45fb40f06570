"""Command line entry point: ``kgband run | compare | gen``."""
import argparse
import logging
import os
import sys

from . import report
from .config import load_config
from .errors import (
    ConfigError,
    DimensionError,
    DomainError,
    InsufficientAnchorsError,
    InsufficientDataError,
    KgbandError,
    NumericalError,
    ParseError,
)
from .harness import compare_policies, run_experiment, summarize
from .spectrum import generate_scenario, save_sweeps

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("kgband")


def _load(path, seed=None, out=None):
    overrides = {}
    if seed is not None:
        overrides["seed"] = seed
    if out is not None:
        overrides["output_dir"] = out
    return load_config(path, **overrides)


def cmd_run(args):
    cfg = _load(args.config, args.seed, args.out)
    results = run_experiment(cfg)
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    stats = summarize(results, cfg.name)
    report.write_results_csv(results, os.path.join(out, "results.csv"))
    report.write_selections_csv(results, os.path.join(out, "selections.csv"))
    # wall times vary between executions, so they stay out of the CSVs
    report.write_stats_csv([stats], os.path.join(out, "summary.csv"), timing=False)
    for r in results:
        report.write_plot_data(r, os.path.join(out, f"plot_run{r.run_index}.csv"))
    with open(os.path.join(out, "timing.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"mean_wall_time = {stats.mean_wall_time:.6f}\n")
        fh.write(f"mean_selection_time = {stats.mean_selection_time:.6f}\n")
    if not args.no_plots:
        from . import plotting

        plotting.plot_trajectory(results[0], os.path.join(out, "trajectory_run0.png"), title=cfg.name)
        plotting.plot_errors(results, os.path.join(out, "errors.png"))
    print(
        f"{cfg.name}: {len(results)} runs  x_rmse={stats.x.rmse:.3f} m  y_rmse={stats.y.rmse:.3f} m  "
        f"selection={stats.mean_selection_time:.3f}s  -> {out}"
    )
    return EXIT_OK


def cmd_compare(args):
    paths = [p for p in args.configs.split(",") if p.strip()]
    cfgs = [_load(p.strip(), args.seed) for p in paths]
    out = args.out
    stats, results = compare_policies(cfgs)
    os.makedirs(out, exist_ok=True)
    report.write_stats_csv(stats, os.path.join(out, "comparison.csv"))
    if not args.no_plots:
        from . import plotting

        plotting.plot_comparison(stats, results, os.path.join(out, "comparison.png"))
    width = max(len(s.label) for s in stats)
    for s in stats:
        print(
            f"{s.label:<{width}}  x_rmse={s.x.rmse:9.3f}  y_rmse={s.y.rmse:9.3f}  "
            f"x_median={s.x.median:9.3f}  selection={s.mean_selection_time:8.3f}s"
        )
    return EXIT_OK


def cmd_gen(args):
    cfg = _load(args.config, args.seed)
    scen = cfg.scenario
    _, sweeps = generate_scenario(scen)
    save_sweeps(args.out, sweeps)
    print(f"wrote {len(sweeps)} sweeps x {sweeps.n_bands} bands to {args.out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="kgband", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="paired comparison of several configs")
    p.add_argument("--configs", required=True, help="comma-separated config files")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="compare_out")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gen", help="write the sweeps of a scenario to CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DomainError, DimensionError, InsufficientAnchorsError, InsufficientDataError) as exc:
        print(f"kgband: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"kgband: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, ParseError) as exc:
        print(f"kgband: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except KgbandError as exc:
        print(f"kgband: error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
