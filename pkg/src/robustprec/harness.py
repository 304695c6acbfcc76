"""Experiment harness: sweep configuration, Monte-Carlo runs over
(seed, radius, SNR-scaling) grids, CSV/JSON persistence, high-SNR
saturation analysis, and deterministic SVG figure emission."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import baselines, distributed, maxmin, sumrate, worst_case
from .instance import NetworkConfig, sample_instance

CSV_HEADER = ["seed", "eps", "gamma_db", "algo", "min_rate", "sum_rate",
              "per_user_rates", "wall_ms", "iters"]

ALGORITHMS = ("maxmin", "mse-maxmin", "sumrate", "distributed", "unilateral",
              "zf-maxmin", "zf-sumrate", "slinr", "slinr-search")

DEFAULT_GAMMA_DB = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0]


@dataclass
class ExperimentConfig:
    """One sweep: a network shape, radius levels, an SNR-scaling grid in dB
    on top of the base per-BS power, seeds, and the algorithms to run."""

    m: int = 2
    k: int = 2
    n: int = 2
    eps_levels: list = field(default_factory=lambda: [0.0, 0.05, 0.1])
    gamma_db: list = field(default_factory=lambda: [0.0])
    power_db: float = 10.0
    seeds: list = field(default_factory=lambda: list(range(20)))
    algorithms: list = field(default_factory=lambda: ["maxmin"])
    weights: float = 1.0
    timing: bool = False
    delta: float = 1e-3

    def __post_init__(self):
        if not self.eps_levels or not self.gamma_db or not self.seeds:
            raise ValueError("eps_levels, gamma_db, and seeds must be non-empty")
        for algo in self.algorithms:
            if algo not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {algo!r}; choose from {ALGORITHMS}")

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


@dataclass
class ResultRow:
    """One (seed, eps, gamma, algorithm) outcome.  Rates are certified
    lower bounds in nats; iters is algorithm-specific progress (bisection
    probes or outer iterations); iters = -1 marks a solver failure."""

    seed: int
    eps: float
    gamma_db: float
    algo: str
    min_rate: float
    sum_rate: float
    per_user_rates: list
    wall_ms: int = 0
    iters: int = 0


def _fmt(x: float) -> str:
    return f"{float(x):.10g}"


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow([r.seed, _fmt(r.eps), _fmt(r.gamma_db), r.algo,
                         _fmt(r.min_rate), _fmt(r.sum_rate),
                         ";".join(_fmt(v) for v in r.per_user_rates),
                         r.wall_ms, r.iters])
    return buf.getvalue()


def rows_from_csv(text: str):
    rows = []
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {header}; need {CSV_HEADER}")
    for rec in reader:
        rows.append(ResultRow(
            seed=int(rec[0]), eps=float(rec[1]), gamma_db=float(rec[2]),
            algo=rec[3], min_rate=float(rec[4]), sum_rate=float(rec[5]),
            per_user_rates=[float(v) for v in rec[6].split(";") if v],
            wall_ms=int(rec[7]), iters=int(rec[8])))
    return rows


def run_algorithm(instance, algo: str, delta: float = 1e-3):
    """Run one named design on an instance.  Returns (PrecoderSet, iters)."""
    if algo == "maxmin":
        _, prec, trace = maxmin.maxmin_via_power(instance, delta=delta)
        return prec, len(trace.probes)
    if algo == "mse-maxmin":
        _, prec, _ = maxmin.minmax_mse_gevp(instance, delta=delta)
        return prec, 0
    if algo == "sumrate":
        prec, _, state = sumrate.weighted_sumrate_ao(instance)
        return prec, len(state.lower_bounds)
    if algo == "distributed":
        _, prec, trace = distributed.distributed_maxmin(instance, delta=delta)
        return prec, len(trace.probes)
    if algo == "unilateral":
        prec, log = distributed.run_unilateral_updates(instance, delta=delta)
        return prec, len(log)
    if algo == "zf-maxmin":
        return baselines.zero_forcing(instance, "maxmin"), 0
    if algo == "zf-sumrate":
        return baselines.zero_forcing(instance, "sumrate"), 0
    if algo == "slinr":
        return baselines.slinr_beamforming(instance, delta=delta), 0
    if algo == "slinr-search":
        return baselines.slinr_profile_search(instance, delta=delta), 0
    raise ValueError(f"unknown algorithm {algo!r}")


def score_precoders(instance, precoders):
    """(min rate, weighted sum rate, flattened per-user rates), all from the
    certified SINR lower bounds, in nats."""
    M, K = instance.config.m, instance.config.k
    per_user = [float(np.log1p(worst_case.sinr_lower_bound(instance, precoders, m, k)))
                for m in range(M) for k in range(K)]
    weighted = sum(instance.weights[m, k] * per_user[m * K + k]
                   for m in range(M) for k in range(K))
    return min(per_user), float(weighted), per_user


def run_rows(config: ExperimentConfig):
    """Execute the sweep; one ResultRow per (seed, eps, gamma, algorithm).
    Failures never abort the sweep: such rows carry zero rates and
    iters = -1."""
    net = NetworkConfig(m=config.m, k=config.k, n=config.n)
    rows = []
    for seed in config.seeds:
        for eps in config.eps_levels:
            for gamma in config.gamma_db:
                power = 10.0 ** ((config.power_db + gamma) / 10.0)
                instance = sample_instance(net, radii=eps, powers=power,
                                           weights=config.weights, seed=seed)
                for algo in config.algorithms:
                    start = time.perf_counter()
                    try:
                        prec, iters = run_algorithm(instance, algo, delta=config.delta)
                        min_rate, sum_rate, per_user = score_precoders(instance, prec)
                    except Exception:
                        min_rate, sum_rate, per_user, iters = 0.0, 0.0, [], -1
                    wall = int(1000 * (time.perf_counter() - start)) if config.timing else 0
                    rows.append(ResultRow(seed=seed, eps=eps, gamma_db=gamma,
                                          algo=algo, min_rate=min_rate,
                                          sum_rate=sum_rate,
                                          per_user_rates=per_user,
                                          wall_ms=wall, iters=iters))
    return rows


def summarize(rows) -> dict:
    """Per (algorithm, eps) means over seeds and gammas, plus failures."""
    groups: dict = {}
    failures = []
    for r in rows:
        key = (r.algo, r.eps)
        groups.setdefault(key, []).append(r)
        if r.iters < 0:
            failures.append({"seed": r.seed, "eps": r.eps,
                             "gamma_db": r.gamma_db, "algo": r.algo})
    summary = {"groups": [], "failures": failures, "rows": len(rows)}
    for (algo, eps) in sorted(groups):
        grp = groups[(algo, eps)]
        summary["groups"].append({
            "algo": algo, "eps": eps, "rows": len(grp),
            "mean_min_rate": float(np.mean([g.min_rate for g in grp])),
            "mean_sum_rate": float(np.mean([g.sum_rate for g in grp])),
        })
    return summary


def run_experiment(config: ExperimentConfig, csv_path, summary_path=None):
    """Run the sweep and persist a CSV plus a summary JSON.  Output bytes
    are deterministic given the config (wall_ms stays 0 unless timing is
    requested)."""
    rows = run_rows(config)
    text = rows_to_csv(rows)
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    summary = summarize(rows)
    if summary_path is not None:
        with open(summary_path, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return rows, summary


def snr_saturation_check(rows, algo: str = "maxmin", monotone_tol: float = 1e-4) -> dict:
    """Per radius level, check the mean min-rate curve over the SNR-scaling
    grid: report monotone-increase violations and the relative gain over
    the last grid step (the saturation metric).  The saturation assertion
    applies only to positive radii."""
    per_eps: dict = {}
    for r in rows:
        if r.algo != algo:
            continue
        per_eps.setdefault(r.eps, {}).setdefault(r.gamma_db, []).append(r.min_rate)
    report = {}
    for eps, curve in sorted(per_eps.items()):
        gammas = sorted(curve)
        means = [float(np.mean(curve[g])) for g in gammas]
        violations = [(gammas[i], gammas[i + 1])
                      for i in range(len(means) - 1)
                      if means[i + 1] < means[i] - monotone_tol]
        if len(means) >= 2 and means[-2] > 0:
            last_gain = (means[-1] - means[-2]) / means[-2]
        else:
            last_gain = float("nan")
        report[eps] = {
            "gammas": gammas,
            "mean_min_rate": means,
            "monotone_violations": violations,
            "last_step_relative_gain": last_gain,
            "saturation_asserted": eps > 0,
        }
    return report


def _matplotlib():
    import matplotlib
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "robustprec"
    import matplotlib.pyplot as plt
    return plt


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})


def emit_figures(csv_path, out_dir):
    """Render the sweep CSV to deterministic SVG figures: per-seed
    normalized min rates (one series per radius level plus distributed
    designs), and mean min rate versus the SNR-scaling grid.  Empty CSVs
    yield valid empty-axes files."""
    import pathlib

    plt = _matplotlib()
    out_dir = pathlib.Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(csv_path, encoding="utf-8") as fh:
        rows = rows_from_csv(fh.read())
    paths = []

    # per-seed min rates, normalized by each seed's zero-radius centralized
    # value when available
    fig, ax = plt.subplots(figsize=(6, 4))
    base = {r.seed: r.min_rate for r in rows
            if r.algo == "maxmin" and r.eps == 0.0}
    series: dict = {}
    for r in rows:
        if r.algo not in ("maxmin", "distributed", "unilateral"):
            continue
        label = (f"maxmin eps={r.eps:g}" if r.algo == "maxmin"
                 else f"{r.algo} eps={r.eps:g}")
        norm = base.get(r.seed)
        val = r.min_rate / norm if norm else r.min_rate
        series.setdefault(label, []).append((r.seed, val))
    for label in sorted(series):
        pts = sorted(series[label])
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=label)
    ax.set_xlabel("seed")
    ax.set_ylabel("normalized min worst-case rate")
    if series:
        ax.legend(fontsize=8)
    p1 = out_dir / "minrate_per_seed.svg"
    _save(fig, p1)
    plt.close(fig)
    paths.append(p1)

    # mean min rate vs SNR scaling
    fig, ax = plt.subplots(figsize=(6, 4))
    curves: dict = {}
    for r in rows:
        curves.setdefault((r.algo, r.eps), {}).setdefault(r.gamma_db, []).append(r.min_rate)
    for (algo, eps) in sorted(curves):
        curve = curves[(algo, eps)]
        gammas = sorted(curve)
        means = [float(np.mean(curve[g])) for g in gammas]
        ax.plot(gammas, means, marker="s", label=f"{algo} eps={eps:g}")
    ax.set_xlabel("SNR scaling gamma (dB)")
    ax.set_ylabel("mean min worst-case rate (nats)")
    if curves:
        ax.legend(fontsize=8)
    p2 = out_dir / "minrate_vs_snr.svg"
    _save(fig, p2)
    plt.close(fig)
    paths.append(p2)
    return paths
