"""Command-line drivers.

Subcommands: fit-predict, synth, convergence, proposal-compare,
likelihood-trace, bench-kernels.  Every command takes --config/--seed/
--out-dir/--threads, echoes the effective configuration into the output
directory, and is deterministic given config plus seed.  Exit codes:
0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import bench, config, datasets, experiments, kernels, oracle
from .config import ConfigError
from .mcmc import ProposalKind, run_chain
from .model import ModelConfig
from .predictor import PosteriorEnsemble, evaluate
from .remc import run_remc
from .routing import FeatureSpace


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args, overrides: dict | None = None) -> dict:
    cfg = config.load_config(args.config, overrides)
    if args.seed is not None:
        cfg["seed"] = args.seed
    return cfg


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _proposal_kinds(names, g_bar, alpha) -> list[ProposalKind]:
    kinds = []
    for name in names:
        section = {"kind": name, "g_bar": g_bar, "alpha": alpha}
        kinds.append(config.proposal_kind_from(section))
    return kinds


def cmd_fit_predict(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    schema = cfg["data"]
    train = datasets.load_csv(args.train, schema)
    test = datasets.load_csv(args.test, schema)
    if train.feature_names != test.feature_names:
        raise ConfigError("train and test files expand to different feature columns")
    model = config.model_from_dataset(cfg, train)
    kind = config.proposal_kind_from(cfg["proposal"])
    rconfig = config.replica_config_from(cfg)

    start = time.perf_counter()
    if rconfig is not None:
        result = run_remc(train.X, train.y, model, kind, rconfig,
                          burn_in=int(cfg["burn_in"]), t_end=int(cfg["t_end"]),
                          seed=int(cfg["seed"]))
    else:
        result = run_chain(train.X, train.y, model, kind,
                           burn_in=int(cfg["burn_in"]), t_end=int(cfg["t_end"]),
                           seed=int(cfg["seed"]))
    ens = PosteriorEnsemble(result.samples, model)
    report = evaluate(ens, test.X, test.y, cfg["loss"])
    elapsed = time.perf_counter() - start

    metric_name = "error_ratio" if cfg["loss"] == "zero_one" else "mse"
    metrics = {
        metric_name: report.value,
        "loss": cfg["loss"],
        "n_train": train.n,
        "n_test": test.n,
        "acceptance_ratio": result.acceptance_ratio,
        "seconds_per_iteration": result.seconds_per_iteration,
        "iterations": int(result.propose_count + result.burn_in),
        "tuned_proposal_param": result.tuned_param,
        "replicas": rconfig.n_replicas if rconfig else 1,
        "wall_clock_seconds": elapsed,
        "kernel_backend": kernels.active_backend(),
        # training-time bisection ranges; prediction always reuses these
        "feature_ranges": {
            name: [model.space.lo[j], model.space.hi[j]]
            for j, name in enumerate(train.feature_names)
        },
    }
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2) + "\n")
    if report.probs is not None:
        header = ["row", "prediction"] + [f"p_class{c}" for c in range(report.probs.shape[1])]
        rows = [[i, int(report.predictions[i]), *report.probs[i]] for i in range(test.n)]
    else:
        header = ["row", "prediction"]
        rows = [[i, float(report.predictions[i])] for i in range(test.n)]
    _write_csv(out / "predictions.csv", header, rows)
    config.dump_effective(cfg, out / "effective_config.json")
    print(f"{metric_name}={report.value:.6f} acceptance={result.acceptance_ratio:.4f} "
          f"({elapsed:.1f}s)")
    return 0


def cmd_synth(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    s = cfg["synth"]
    d_max = int(s["d_max"] if s["d_max"] is not None else cfg["d_max"])
    g = s["split_prior_g"] if s["split_prior_g"] is not None else cfg["split_prior_g"]
    p, q = int(s["p"]), int(s["q"])
    # continuous features sample uniformly on their initial range, [0, 1) unless set
    ranges = cfg.get("initial_ranges") or {}
    lo = np.zeros(p + q)
    hi = np.ones(p + q)
    for j in range(p):
        pair = ranges.get(str(j), (0.0, 1.0))
        lo[j], hi[j] = float(pair[0]), float(pair[1])
    space = FeatureSpace(p=p, q=q, lo=lo, hi=hi)
    model = ModelConfig.create(d_max, g, space, config.leaf_spec_from(cfg))
    train, test, true = datasets.synth_generate(
        model, int(s["n_train"]), int(s["n_test"]),
        model_seed=int(s["model_seed"]), data_seed=int(s["data_seed"]),
    )
    datasets.write_csv(train, out / "train.csv")
    datasets.write_csv(test, out / "test.csv")
    (out / "true_model.json").write_text(json.dumps(true.to_jsonable(), indent=2) + "\n")
    config.dump_effective(cfg, out / "effective_config.json")
    print(f"wrote {train.n} train rows, {test.n} test rows, "
          f"{len(true.tree.leaves)} generating leaves")
    return 0


def cmd_convergence(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    c = cfg["convergence"]
    model = experiments.bernoulli_model(int(c["d_max"]), int(c["q"]), float(c["split_prior_g"]))
    if oracle.assignment_space_size(model) > int(c["enumeration_cap"]):
        raise ConfigError("convergence instance exceeds the enumeration cap")
    true = experiments.benchmark_true_model(c["true_model"], model)
    kinds = _proposal_kinds(c["kinds"], c["g_bar"], c.get("alpha", 0.8))
    report = experiments.convergence_experiment(
        model, true, n=int(c["n"]), n_datasets=int(c["n_datasets"]), kinds=kinds,
        burn_in=int(c["burn_in"]), accept_target=int(c["accept_target"]),
        seed=int(cfg["seed"]), threads=args.threads,
    )
    rows = []
    for tr in report.traces:
        for acc, js in zip(tr.accepted, tr.js):
            if np.isfinite(js):
                rows.append([tr.kind, tr.dataset_index, int(acc), js])
    _write_csv(out / "convergence.csv", ["kind", "dataset", "accepted", "js_divergence"], rows)
    summary = {
        "checkpoints": report.checkpoints.tolist(),
        "mean_js": {k: v.tolist() for k, v in report.mean_js.items()},
        "mean_acceptance_ratio": report.mean_acceptance,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    config.dump_effective(cfg, out / "effective_config.json")
    for kind, js in report.mean_js.items():
        print(f"{kind}: mean JS at {report.checkpoints[-1]} accepted = {js[-1]:.4f} "
              f"(acceptance {report.mean_acceptance[kind]:.4f})")
    return 0


def cmd_proposal_compare(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    c = cfg["compare"]
    model = experiments.bernoulli_model(int(c["d_max"]), int(c["q"]), float(c["split_prior_g"]))
    kinds = _proposal_kinds(c["kinds"], c["g_bar"], c["alpha"])
    table = experiments.proposal_comparison(
        model, list(c["models"]), n=int(c["n"]), kinds=kinds,
        burn_in=int(c["burn_in"]), t_end=int(c["t_end"]), seed=int(cfg["seed"]),
    )
    rows = [[m, k, table.ratios[(m, k)]] for m in table.models for k in table.kinds]
    _write_csv(out / "acceptance_ratios.csv", ["model", "kind", "acceptance_ratio"], rows)
    config.dump_effective(cfg, out / "effective_config.json")
    width = max(len(k) for k in table.kinds) + 2
    print("model " + "".join(k.ljust(width) for k in table.kinds))
    for name, vals in table.rows():
        print(f"{name:<6}" + "".join(f"{vals[k]:<{width}.4f}" for k in table.kinds))
    return 0


def cmd_likelihood_trace(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    train = datasets.load_csv(args.train, cfg["data"])
    model = config.model_from_dataset(cfg, train)
    kind = config.proposal_kind_from(cfg["proposal"])
    result = experiments.likelihood_trace(
        train.X, train.y, model, kind,
        burn_in=int(cfg["burn_in"]), t_end=int(cfg["t_end"]), seed=int(cfg["seed"]),
    )
    rows = [
        [t + 1, "burn_in" if t < result.burn_in else "sampling",
         result.loglik_trace[t], int(result.accepted_trace[t])]
        for t in range(len(result.loglik_trace))
    ]
    _write_csv(out / "likelihood_trace.csv",
               ["iteration", "phase", "log_marginal_likelihood", "accepted"], rows)
    config.dump_effective(cfg, out / "effective_config.json")
    print(f"trace of {len(rows)} iterations written; "
          f"acceptance={result.acceptance_ratio:.4f}")
    return 0


def cmd_bench_kernels(args) -> int:
    out = _out_dir(args)
    rows = bench.run_benchmark(
        n_values=tuple(args.sizes), d_max=args.d_max, repeats=args.repeats,
        seed=args.seed if args.seed is not None else 0,
    )
    _write_csv(out / "bench.csv", ["op", "backend", "n", "d_max", "micros_per_call"],
               [[r.op, r.backend, r.n, r.d_max, r.micros_per_call] for r in rows])
    print(bench.format_table(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtmcmc",
        description="Bayes-optimal prediction over model trees via MCMC on "
                    "feature assignments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out-dir", default="out", help="output directory")
        p.add_argument("--threads", type=int, default=config.default_threads(),
                       help="worker threads (default: MTMCMC_THREADS or 1)")

    p = sub.add_parser("fit-predict", help="train on one CSV, score another")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    common(p)
    p.set_defaults(func=cmd_fit_predict)

    p = sub.add_parser("synth", help="draw a generating tree and sample data from it")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("convergence", help="JS divergence to the exact posterior")
    common(p)
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("proposal-compare", help="acceptance ratios per proposal kind")
    common(p)
    p.set_defaults(func=cmd_proposal_compare)

    p = sub.add_parser("likelihood-trace", help="per-iteration marginal likelihood")
    p.add_argument("--train", required=True)
    common(p)
    p.set_defaults(func=cmd_likelihood_trace)

    p = sub.add_parser("bench-kernels", help="time numba vs numpy kernel backends")
    p.add_argument("--sizes", type=int, nargs="+", default=[500, 1000, 2000])
    p.add_argument("--d-max", type=int, default=10)
    p.add_argument("--repeats", type=int, default=30)
    common(p)
    p.set_defaults(func=cmd_bench_kernels)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except Exception as err:  # noqa: BLE001 - simple CLI boundary
        print(f"runtime error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
