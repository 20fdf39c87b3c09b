"""Experiment orchestration: spec files, replicated runs, CSV traces,
summaries, figures, and the embedding-dump subcommand.

A spec is a JSON file; dotted-key overrides from the command line are merged
on top. Every run writes its own trace atomically, so replications can run
in parallel worker processes without contention.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import bench, plots, semisir
from .acquisition import AcquisitionSpec
from .optimizer import METHODS, OptimizerConfig, run_method

TRACE_HEADER = "t,y,best,f_evals,b_gen"
FLOAT_FMT = "%.17g"

DEFAULT_SPEC = {
    "benchmark": {"name": "branin", "dim": 100, "noise_sd": 0.0, "eval_cost_s": 0.0},
    "methods": ["silbo-bu", "silbo-td", "rembo", "random"],
    "replications": 2,
    "seed": 0,
    "optimizer": {"iterations": 50},
    "output_dir": "results",
    "dump": {"points": 50},
}


def load_spec(path):
    with open(path) as fh:
        return json.load(fh)


def apply_overrides(spec, overrides):
    """Merge ``key.sub=value`` strings into the spec (values parsed as JSON
    when possible, kept as strings otherwise)."""
    for item in overrides or []:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not of the form key=value")
        dotted, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = spec
        keys = dotted.split(".")
        for key in keys[:-1]:
            node = node.setdefault(key, {})
        node[keys[-1]] = value
    return spec


def resolve_spec(spec):
    """Fill defaults and validate names; returns a fully explicit spec."""
    out = copy.deepcopy(DEFAULT_SPEC)
    for key, value in (spec or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key].update(value)
        else:
            out[key] = value
    name = out["benchmark"].get("name")
    if name not in bench.FUNCTIONS:
        raise ValueError(
            f"unknown benchmark {name!r}; choose from {sorted(bench.FUNCTIONS)}"
        )
    for method in out["methods"]:
        if method not in METHODS:
            raise ValueError(
                f"unknown method {method!r}; choose from {sorted(METHODS)}"
            )
    if int(out["replications"]) < 1:
        raise ValueError("replications must be >= 1")
    opt = out["optimizer"]
    opt.setdefault("embed_dim", bench.FUNCTIONS[name].r_true)
    opt.setdefault("iterations", 50)
    return out


def _build_config(resolved, seed):
    opt = dict(resolved["optimizer"])
    acq = AcquisitionSpec(**opt.pop("acquisition", {}))
    return OptimizerConfig(
        dim=int(resolved["benchmark"]["dim"]),
        acquisition=acq,
        seed=seed,
        **opt,
    )


def _trace_path(out_dir, method, seed):
    return os.path.join(out_dir, f"{method}_{seed}.csv")


def write_trace(path, record):
    cols = record.trace_columns()
    lines = [TRACE_HEADER]
    for i in range(len(cols["t"])):
        lines.append(
            ",".join(
                [
                    str(int(cols["t"][i])),
                    FLOAT_FMT % cols["y"][i],
                    FLOAT_FMT % cols["best"][i],
                    str(int(cols["f_evals"][i])),
                    str(int(cols["b_gen"][i])),
                ]
            )
        )
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def read_trace(path):
    data = np.genfromtxt(path, delimiter=",", names=True)
    data = np.atleast_1d(data)
    return {name: data[name] for name in data.dtype.names}


def _run_single(resolved, method, rep):
    """One (method, replication) run; executed possibly in a worker process."""
    base_seed = int(resolved["seed"])
    seed = base_seed + rep
    bench_cfg = resolved["benchmark"]
    objective = bench.make_benchmark(
        bench_cfg["name"],
        int(bench_cfg["dim"]),
        seed=seed,
        noise_sd=float(bench_cfg.get("noise_sd", 0.0)),
        eval_cost_s=float(bench_cfg.get("eval_cost_s", 0.0)),
    )
    config = _build_config(resolved, seed)
    record = run_method(method, objective, config)
    out_dir = resolved["output_dir"]
    path = _trace_path(out_dir, method, seed)
    write_trace(path, record)
    return {
        "method": method,
        "seed": seed,
        "trace": os.path.basename(path),
        "final_best": record.best_y,
        "f_evals": record.f_evals,
        "b_updates": record.b_updates,
        "status": "ok",
    }


def run_experiment(spec, out_dir=None, jobs=1):
    """Run every configured method/replication, then write the summary CSV,
    the convergence figure, and the JSON manifest. Returns a process exit
    status (0 on success)."""
    resolved = resolve_spec(spec)
    if out_dir is not None:
        resolved["output_dir"] = out_dir
    out = resolved["output_dir"]
    os.makedirs(out, exist_ok=True)

    tasks = [
        (method, rep)
        for method in resolved["methods"]
        for rep in range(int(resolved["replications"]))
    ]
    results = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(_run_single, resolved, method, rep)
                for method, rep in tasks
            ]
            for (method, rep), fut in zip(tasks, futures):
                try:
                    results.append(fut.result())
                except Exception as err:  # noqa: BLE001 - record and continue
                    results.append(
                        {
                            "method": method,
                            "seed": int(resolved["seed"]) + rep,
                            "status": f"failed: {err}",
                        }
                    )
    else:
        for method, rep in tasks:
            try:
                results.append(_run_single(resolved, method, rep))
            except Exception as err:  # noqa: BLE001
                traceback.print_exc()
                results.append(
                    {
                        "method": method,
                        "seed": int(resolved["seed"]) + rep,
                        "status": f"failed: {err}",
                    }
                )

    summary = summarize(resolved, results)
    summary_path = os.path.join(out, "summary.csv")
    _write_summary(summary_path, summary)

    fig_path = os.path.join(out, "convergence.png")
    fig_data = {
        method: (rows["t"], rows["mean"], rows["std"])
        for method, rows in summary.items()
    }
    if fig_data:
        plots.convergence_figure(
            fig_data,
            fig_path,
            title=f"{resolved['benchmark']['name']} d={resolved['benchmark']['dim']}",
        )

    manifest = {
        "spec": resolved,
        "runs": results,
        "summary": os.path.basename(summary_path),
        "figure": os.path.basename(fig_path) if fig_data else None,
    }
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, default=str)

    failed = [r for r in results if r["status"] != "ok"]
    if len(failed) == len(results):
        return 1
    return 0


def summarize(resolved, results):
    """Per-iteration mean/std of the incumbent across successful runs."""
    out_dir = resolved["output_dir"]
    summary = {}
    for method in resolved["methods"]:
        bests = []
        ts = None
        for item in results:
            if item["method"] != method or item["status"] != "ok":
                continue
            trace = read_trace(os.path.join(out_dir, item["trace"]))
            bests.append(trace["best"])
            ts = trace["t"]
        if not bests:
            continue
        arr = np.vstack(bests)
        std = (
            np.std(arr, axis=0, ddof=1) if arr.shape[0] > 1 else np.zeros(arr.shape[1])
        )
        summary[method] = {"t": ts, "mean": np.mean(arr, axis=0), "std": std}
    return summary


def _write_summary(path, summary):
    lines = ["method,t,mean_best,std_best"]
    for method, rows in summary.items():
        for i in range(len(rows["t"])):
            lines.append(
                ",".join(
                    [
                        method,
                        str(int(rows["t"][i])),
                        FLOAT_FMT % rows["mean"][i],
                        FLOAT_FMT % rows["std"][i],
                    ]
                )
            )
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def dump_embedding(spec, out_dir=None):
    """Evaluate a batch of points, learn a projection from them, and write
    the (z_1..z_r, y) table plus its scatter figure."""
    resolved = resolve_spec(spec)
    if out_dir is not None:
        resolved["output_dir"] = out_dir
    out = resolved["output_dir"]
    os.makedirs(out, exist_ok=True)

    seed = int(resolved["seed"])
    bench_cfg = resolved["benchmark"]
    objective = bench.make_benchmark(bench_cfg["name"], int(bench_cfg["dim"]), seed=seed)
    n_points = int(resolved["dump"].get("points", 50))
    opt = resolved["optimizer"]
    r = int(opt["embed_dim"])

    rng = np.random.default_rng(seed)
    xs = rng.uniform(-1.0, 1.0, size=(n_points, objective.d))
    ys = np.array([objective(x) for x in xs])
    h = min(int(opt.get("slices", 5)), n_points // 2)
    model = semisir.solve_embedding(
        xs,
        ys,
        None,
        r=r,
        h=h,
        k=int(opt.get("knn_k", 7)),
        alpha=float(opt.get("laplacian_alpha", 1.0)),
        seed=seed,
    )
    table = semisir.embedding_table(model, xs, ys)

    header = ",".join([f"z_{i + 1}" for i in range(model.r)] + ["y"])
    path = os.path.join(out, "embedding.csv")
    lines = [header]
    for row in table:
        lines.append(",".join(FLOAT_FMT % v for v in row))
    with open(path + ".tmp", "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(path + ".tmp", path)

    plots.embedding_figure(
        table[:, :-1],
        table[:, -1],
        os.path.join(out, "embedding.png"),
        title=f"{bench_cfg['name']} d={bench_cfg['dim']} r={model.r}",
    )
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="silbo",
        description="High-dimensional Bayesian optimization experiments on a "
        "learned low-dimensional embedding",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a replicated experiment from a spec file")
    p_run.add_argument("--spec", required=True, help="path to a JSON spec file")
    p_run.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p_run.add_argument("--out", default=None, help="output directory override")
    p_run.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="dotted-key spec override, e.g. optimizer.iterations=30",
    )

    p_dump = sub.add_parser(
        "dump-embedding", help="evaluate points, learn a projection, dump (z, y)"
    )
    p_dump.add_argument("--spec", required=True)
    p_dump.add_argument("--out", default=None)
    p_dump.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")

    args = parser.parse_args(argv)
    try:
        spec = apply_overrides(load_spec(args.spec), args.override)
        if args.command == "run":
            return run_experiment(spec, out_dir=args.out, jobs=args.jobs)
        return dump_embedding(spec, out_dir=args.out)
    except (ValueError, OSError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
