"""Command-line entry points for the experiment harness.

Subcommands: ``run --config FILE`` executes an experiment config and writes
its CSV; ``list-experiments`` prints the registered experiment names;
``dump-points`` prints a generated point set (17 significant digits, one
point per line); ``truth --experiment NAME`` prints the reference value the
harness would measure against, with its provenance. Exit code 0 on success,
2 with a named failure otherwise.
"""

import argparse
import os
import sys

from . import harness, pointgen


def _cmd_run(args):
    config = harness.load_config(args.config)
    if args.output_dir:
        config.output_dir = args.output_dir
    result = harness.run_experiment(config)
    out_dir = harness.output_directory(config)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{config.experiment}.csv")
    harness.write_csv(result, path)
    truth = " ".join(f"{v:.6g}" for v in result.truth)
    print(f"experiment={config.experiment} truth=[{truth}] ({result.truth_provenance})")
    for method, sampler in result.series():
        slope = result.slopes.get((method, sampler))
        slope_txt = f"{slope[0]:+.3f}" if slope else "n/a"
        rmses = [
            f"{b}:{result.rmses[(method, sampler, b)]:.3e}"
            for b in config.budgets if (method, sampler, b) in result.rmses
        ]
        print(f"  {method}/{sampler}: slope={slope_txt} rmse {' '.join(rmses)}")
    for method, sampler, budget, message in result.failures:
        print(f"  FAILED {method}/{sampler}@{budget}: {message}")
    print(f"wrote {path}")
    return 1 if result.failures else 0


def _cmd_list(args):
    for name in harness.EXPERIMENT_NAMES:
        print(name)
    return 0


def _cmd_dump_points(args):
    ps = pointgen.generate_sobol(args.m, args.d, args.seed, scramble=not args.raw)
    pointgen.dump_points(ps, sys.stdout)
    return 0


def _cmd_truth(args):
    config = harness.load_config(args.config) if args.config \
        else harness.default_config(args.experiment)
    if config.experiment != args.experiment:
        raise ValueError(
            f"config is for {config.experiment!r}, not {args.experiment!r}")
    setup = harness._build_setup(config)
    values = " ".join(f"{v:.17g}" for v in __import__("numpy").atleast_1d(setup.truth))
    print(f"{args.experiment}: {values} (provenance: {setup.provenance})")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rqmc-mamis",
        description="Adaptive multiple importance sampling rate experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config and write its CSV")
    p_run.add_argument("--config", required=True, help="flat key=value config file")
    p_run.add_argument("--output-dir", default=None,
                       help=f"output directory (default: ${harness.OUTPUT_DIR_ENV} or cwd)")
    p_run.set_defaults(fn=_cmd_run)

    p_list = sub.add_parser("list-experiments", help="print registered experiment names")
    p_list.set_defaults(fn=_cmd_list)

    p_dump = sub.add_parser("dump-points", help="print a scrambled Sobol' point set")
    p_dump.add_argument("--m", type=int, required=True, help="log2 point count")
    p_dump.add_argument("--d", type=int, required=True, help="dimension")
    p_dump.add_argument("--seed", type=int, required=True, help="scramble seed")
    p_dump.add_argument("--raw", action="store_true",
                        help="dump the unscrambled digital net instead")
    p_dump.set_defaults(fn=_cmd_dump_points)

    p_truth = sub.add_parser("truth", help="print an experiment's reference value")
    p_truth.add_argument("--experiment", required=True, choices=harness.EXPERIMENT_NAMES)
    p_truth.add_argument("--config", default=None,
                         help="optional config (affects self-oracle budgets)")
    p_truth.set_defaults(fn=_cmd_truth)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # surface a named failure, nonzero exit
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
