"""Command-line interface for the robust precoder toolkit.

Subcommands: validate, sample, maxmin, mse-maxmin, sumrate, distributed,
baseline, sweep, plot.  Powers on the command line are in dB.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import baselines, distributed, harness, instance as inst_mod, maxmin, sumrate, worst_case
from .instance import NetworkConfig, PrecoderSet, load_instance, sample_instance, save_instance


def _add_shared(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file: an instance file, or an "
                                    "experiment config for 'sweep'")
    p.add_argument("--seed", type=int, default=0, help="RNG seed for sampling")
    p.add_argument("--eps", type=float, default=0.1,
                   help="channel uncertainty radius for sampled instances")
    p.add_argument("--snr-db", type=float, default=10.0,
                   help="per-BS transmit power in dB for sampled instances")
    p.add_argument("--tol", type=float, default=1e-3,
                   help="bisection / convergence tolerance")
    p.add_argument("--out", help="output path (precoder JSON, CSV, or directory)")


def _add_shape(p: argparse.ArgumentParser):
    p.add_argument("--m", type=int, default=2, help="number of cells")
    p.add_argument("--k", type=int, default=2, help="users per cell")
    p.add_argument("--n", type=int, default=2, help="antennas per BS")


def _get_instance(args):
    if args.config:
        return load_instance(args.config)
    cfg = NetworkConfig(m=args.m, k=args.k, n=args.n)
    power = 10.0 ** (args.snr_db / 10.0)
    return sample_instance(cfg, radii=args.eps, powers=power, seed=args.seed)


def save_precoders(precoders: PrecoderSet, path) -> None:
    doc = {"matrices": inst_mod._complex_array_out(precoders.matrices)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_precoders(path) -> PrecoderSet:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    arr = np.asarray(doc["matrices"], dtype=float)
    return PrecoderSet(arr[..., 0] + 1j * arr[..., 1])


def _report(instance, precoders, out=None, extra=None):
    min_rate, sum_rate, per_user = harness.score_precoders(instance, precoders)
    print(f"min worst-case rate (nats): {min_rate:.6f}")
    print(f"weighted sum-rate lower bound (nats): {sum_rate:.6f}")
    print("per-user rates:", " ".join(f"{v:.6f}" for v in per_user))
    for key, val in (extra or {}).items():
        print(f"{key}: {val}")
    if out:
        save_precoders(precoders, out)
        print(f"precoders written to {out}")


def cmd_validate(args):
    if not args.config:
        print("validate requires --config <instance.json>", file=sys.stderr)
        return 2
    inst = load_instance(args.config)
    issues = inst_mod.validate(inst)
    if issues:
        for issue in issues:
            print(f"invalid: {issue}")
        return 1
    print("ok")
    return 0


def cmd_sample(args):
    inst = _get_instance(args)
    if not args.out:
        print("sample requires --out <instance.json>", file=sys.stderr)
        return 2
    save_instance(inst, args.out)
    print(f"instance written to {args.out}")
    return 0


def cmd_maxmin(args):
    inst = _get_instance(args)
    a_star, prec, trace = maxmin.maxmin_via_power(inst, delta=args.tol)
    _report(inst, prec, args.out,
            {"certified min worst-case SINR": f"{a_star:.6f}",
             "bisection probes": len(trace.probes)})
    return 0


def cmd_mse_maxmin(args):
    inst = _get_instance(args)
    level, prec, _ = maxmin.minmax_mse_gevp(inst, delta=args.tol)
    _report(inst, prec, args.out,
            {"worst-case RMS-MSE level": f"{level:.6f}",
             "rate lower bound from MSE": f"{maxmin.mse_rate_lower_bound(level):.6f}"})
    return 0


def cmd_sumrate(args):
    inst = _get_instance(args)
    prec, _, state = sumrate.weighted_sumrate_ao(inst, outer_tol=args.tol)
    _report(inst, prec, args.out,
            {"outer iterations": len(state.lower_bounds),
             "final bound trace value": f"{state.lower_bounds[-1]:.6f}"})
    return 0


def cmd_distributed(args):
    inst = _get_instance(args)
    if args.mode == "dual":
        a_star, prec, trace = distributed.distributed_maxmin(inst, delta=args.tol)
        extra = {"certified min worst-case SINR": f"{a_star:.6f}",
                 "bisection probes": len(trace.probes)}
        log = None
    else:
        runner = (distributed.run_unilateral_updates_greedy if args.mode == "greedy"
                  else distributed.run_unilateral_updates)
        prec, log = runner(inst, delta=args.tol)
        extra = {"messages": len(log)}
    _report(inst, prec, args.out, extra)
    if log is not None and args.log:
        distributed.save_event_log(args.log, log)
        print(f"event log written to {args.log}")
    return 0


def cmd_baseline(args):
    inst = _get_instance(args)
    if args.algo in ("zf-maxmin", "zf-sumrate"):
        prec = baselines.zero_forcing(inst, args.algo.split("-")[1])
    elif args.algo == "slinr":
        prec = baselines.slinr_beamforming(inst, delta=args.tol)
    else:
        prec = baselines.slinr_profile_search(inst, delta=args.tol)
    _report(inst, prec, args.out)
    return 0


def cmd_sweep(args):
    if not args.config:
        print("sweep requires --config <experiment.json>", file=sys.stderr)
        return 2
    cfg = harness.ExperimentConfig.from_json(args.config)
    csv_path = args.out or "sweep.csv"
    summary_path = str(csv_path) + ".summary.json"
    rows, summary = harness.run_experiment(cfg, csv_path, summary_path)
    print(f"{len(rows)} rows written to {csv_path}")
    print(f"summary written to {summary_path}")
    if summary["failures"]:
        print(f"warning: {len(summary['failures'])} rows failed")
    return 0


def cmd_plot(args):
    if not args.csv:
        print("plot requires a CSV path", file=sys.stderr)
        return 2
    out_dir = args.out or "figures"
    paths = harness.emit_figures(args.csv, out_dir)
    for p in paths:
        print(f"figure written to {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robustprec",
        description="Worst-case robust precoder design for multi-cell "
                    "MISO downlinks (powers in dB)")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, help_text in [
            ("validate", cmd_validate, "check an instance file"),
            ("sample", cmd_sample, "sample a random instance to JSON"),
            ("maxmin", cmd_maxmin, "centralized robust max-min design"),
            ("mse-maxmin", cmd_mse_maxmin, "min-max worst-case-MSE design"),
            ("sumrate", cmd_sumrate, "weighted sum-rate alternating optimization"),
            ("distributed", cmd_distributed, "distributed max-min designs"),
            ("baseline", cmd_baseline, "zero-forcing / SLINR comparators"),
            ("sweep", cmd_sweep, "run an experiment config to CSV + summary"),
            ("plot", cmd_plot, "render a sweep CSV to SVG figures")]:
        p = sub.add_parser(name, help=help_text)
        _add_shared(p)
        if name not in ("sweep", "plot", "validate"):
            _add_shape(p)
        if name == "distributed":
            p.add_argument("--mode", choices=["dual", "round-robin", "greedy"],
                           default="dual")
            p.add_argument("--log", help="write the message log as JSONL")
        if name == "baseline":
            p.add_argument("--algo", choices=["zf-maxmin", "zf-sumrate",
                                              "slinr", "slinr-search"],
                           default="zf-maxmin")
        if name == "plot":
            p.add_argument("csv", nargs="?", help="sweep CSV to plot")
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
