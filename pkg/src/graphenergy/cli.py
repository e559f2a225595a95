"""Command-line front end: initialization sweeps, flows, pruning scans,
graph generation, dataset stats, series fitting, similarity matrices.

Every output file embeds the seed, a hash of the producing
configuration, the package version, and the measurement convention, so
any number can be traced back to its recipe. No timestamps are written:
re-running a command with the same inputs reproduces every byte.

Subcommands write one CSV per series (``index,value`` rows) and one JSON
per structured report, in a ``variant/depth-XXX/seed-YY`` layout for
sweeps.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np

import graphenergy
from graphenergy.attention import SCORE_VARIANTS, AttentionKind
from graphenergy.diagnostics import (
    EnergySeries,
    FitReport,
    StallVerdict,
    cosine_similarity_matrix,
    energy_series,
    fit_decay,
    prune_layer_deviation,
    relative_change_series,
)
from graphenergy.dynamics import (
    FLOW_GATED,
    FLOW_HEAT,
    FLOW_KINDS,
    FLOW_NORMALIZED,
    FlowSpec,
    simulate_heat,
    simulate_nonlocal,
    simulate_preln_flow,
)
from graphenergy.graph import WeightedGraph
from graphenergy.ingest import (
    GENERATOR_KINDS,
    SyntheticSpec,
    dataset_stats,
    ensure_directory,
    generate_graph,
    load_edge_list,
    load_features,
    load_labels,
    load_matrix,
    random_features,
    write_edge_list,
    write_matrix,
)
from graphenergy.network import (
    MODEL_VARIANTS,
    ModelConfig,
    forward_trajectory,
    init_model,
)

DEFAULT_DEPTHS = (2, 32, 64, 128, 256)
DEFAULT_SEEDS = tuple(range(10))
DEFAULT_FEATURE_SEED = 7
MEASUREMENT_NOTE = (
    "energies measured on the unit-weight graph with vertex measure "
    "degree+1 over the run topology"
)
COSINE_LAYER_CAP = 17  # cosine matrices subsample to at most this many layers


def surrogate_spec(seed: int = 0) -> SyntheticSpec:
    """Default synthetic stand-in for a citation graph: seven blocks,
    ~2500 nodes, mean degree ~12 (dense enough that a connected sample
    appears within a few draws)."""
    k = 7
    return SyntheticSpec(
        kind="sbm",
        block_sizes=(358,) * k,
        block_probs=tuple(
            tuple(0.03 if a == b else 0.0004 for b in range(k)) for a in range(k)
        ),
        seed=seed,
    )


@dataclass(frozen=True)
class SweepSpec:
    """One initialization sweep: the cross product of variants, depths,
    and seeds on a single graph."""

    depths: tuple[int, ...] = DEFAULT_DEPTHS
    variants: tuple[str, ...] = MODEL_VARIANTS
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    attention: AttentionKind = field(default_factory=AttentionKind)
    heads: int = 1
    hidden_dim: int = 32
    input_dim: int = 32
    output_dim: int = 7
    feature_seed: int = DEFAULT_FEATURE_SEED
    feature_scale: float = 1.0
    graph_label: str = "graph"
    energy_order: int = 2
    dump_states: bool = False
    write_cosine: bool = True

    def __post_init__(self) -> None:
        if not self.depths or not self.variants or not self.seeds:
            raise ValueError("depths, variants, and seeds must be nonempty")
        if min(self.depths) < 1:
            raise ValueError("depths must be positive")


@dataclass(frozen=True, eq=False)
class SweepJob:
    """Result of one (variant, depth, seed) cell. ``error`` holds the
    failure message when ``ok`` is False and the numeric fields are
    None."""

    variant: str
    depth: int
    seed: int
    ok: bool
    error: str | None
    series: EnergySeries | None
    final_energy: float | None
    fit: FitReport | None
    stall: StallVerdict | None


@dataclass(frozen=True, eq=False)
class SweepResult:
    jobs: tuple[SweepJob, ...]
    out_dir: str | None
    config_hash: str

    @property
    def all_ok(self) -> bool:
        return all(j.ok for j in self.jobs)

    def job(self, variant: str, depth: int, seed: int) -> SweepJob:
        for j in self.jobs:
            if (j.variant, j.depth, j.seed) == (variant, depth, seed):
                return j
        raise KeyError((variant, depth, seed))


def run_sweep(
    G: WeightedGraph,
    spec: SweepSpec,
    out_dir: str | None = None,
    workers: int = 1,
) -> SweepResult:
    """Forward every (variant, depth, seed) cell at initialization and
    measure it; optionally write the per-job artifact tree under
    ``out_dir``. Job failures are recorded, not raised."""
    X = random_features(
        G.n, spec.input_dim, seed=spec.feature_seed, scale=spec.feature_scale
    )
    config_hash = _config_hash(_sweep_meta(G, spec))
    cells = [
        (variant, depth, seed)
        for variant in spec.variants
        for depth in spec.depths
        for seed in spec.seeds
    ]
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            jobs = list(
                pool.map(
                    _run_cell,
                    [(G, X, spec, cell, out_dir, config_hash) for cell in cells],
                )
            )
    else:
        jobs = [_run_cell((G, X, spec, cell, out_dir, config_hash)) for cell in cells]

    result = SweepResult(jobs=tuple(jobs), out_dir=out_dir, config_hash=config_hash)
    if out_dir is not None:
        _write_sweep_summary(result, G, spec)
    return result


def _run_cell(packed) -> SweepJob:
    G, X, spec, (variant, depth, seed), out_dir, config_hash = packed
    cfg = ModelConfig(
        input_dim=spec.input_dim,
        output_dim=spec.output_dim,
        depth=depth,
        hidden_dim=spec.hidden_dim,
        heads=spec.heads,
        variant=variant,
        attention=spec.attention,
        seed=seed,
    )
    try:
        trajectory = forward_trajectory(init_model(cfg), cfg, G, X)
        series = energy_series(trajectory, spec.energy_order, topology=G)
        try:
            fit = fit_decay(series)
        except ValueError:  # shallow stacks have too few points
            fit = None
        stall = (
            relative_change_series(series).verdict
            if series.values.size >= 2
            else None
        )
    except Exception as exc:  # capture per-job, keep the sweep alive
        job = SweepJob(
            variant=variant,
            depth=depth,
            seed=seed,
            ok=False,
            error=f"{type(exc).__name__}: {exc}",
            series=None,
            final_energy=None,
            fit=None,
            stall=None,
        )
        if out_dir is not None:
            _write_job_error(out_dir, job, config_hash)
        return job

    job = SweepJob(
        variant=variant,
        depth=depth,
        seed=seed,
        ok=True,
        error=None,
        series=series,
        final_energy=float(series.values[-1]),
        fit=fit,
        stall=stall,
    )
    if out_dir is not None:
        _write_job_files(out_dir, job, trajectory, spec, config_hash)
    return job


def _job_dir(out_dir: str, job: SweepJob) -> str:
    return os.path.join(
        out_dir, job.variant, f"depth-{job.depth:03d}", f"seed-{job.seed:02d}"
    )


def _write_job_files(out_dir, job, trajectory, spec: SweepSpec, config_hash) -> None:
    directory = _job_dir(out_dir, job)
    ensure_directory(directory)
    meta = _csv_meta(config_hash, job.seed)
    series = job.series
    _write_csv(
        os.path.join(directory, "energy.csv"),
        meta,
        ("layer", "energy"),
        (series.indices, series.values),
    )
    changes = relative_change_series(series).values if series.values.size >= 2 else []
    _write_csv(
        os.path.join(directory, "relative_change.csv"),
        meta,
        ("layer", "relative_change"),
        (series.indices[1:], changes),
    )
    if spec.write_cosine:
        keep = _subsample(len(trajectory.states), COSINE_LAYER_CAP)
        sub = SimpleNamespace(states=tuple(trajectory.states[k] for k in keep))
        matrix = cosine_similarity_matrix(sub)
        _write_csv(
            os.path.join(directory, "cosine.csv"),
            meta + [f"# layers {','.join(str(int(k)) for k in keep)}"],
            tuple(f"layer_{int(k)}" for k in keep),
            tuple(matrix[:, c] for c in range(matrix.shape[1])),
        )
    if spec.dump_states:
        states_dir = os.path.join(directory, "states")
        ensure_directory(states_dir)
        for k, state in enumerate(trajectory.states):
            write_matrix(
                os.path.join(states_dir, f"layer-{k:03d}.csv"),
                state,
                provenance=f"config-hash={config_hash} seed={job.seed} layer={k}",
            )
    report = {
        "variant": job.variant,
        "depth": job.depth,
        "seed": job.seed,
        "final_energy": job.final_energy,
        "energy_order": spec.energy_order,
        "fit": _fit_dict(job.fit),
        "stall": _stall_dict(job.stall),
    }
    _write_json(os.path.join(directory, "report.json"), report, config_hash, job.seed)


def _write_job_error(out_dir, job: SweepJob, config_hash) -> None:
    directory = _job_dir(out_dir, job)
    ensure_directory(directory)
    _write_json(
        os.path.join(directory, "report.json"),
        {
            "variant": job.variant,
            "depth": job.depth,
            "seed": job.seed,
            "error": job.error,
        },
        config_hash,
        job.seed,
    )


def _write_sweep_summary(result: SweepResult, G: WeightedGraph, spec: SweepSpec):
    summary = {
        "graph": {
            "label": spec.graph_label,
            "nodes": G.n,
            "edges": int(G.indices.size // 2),
        },
        "seeds": list(spec.seeds),
        "cells": {},
        "failures": [
            {
                "variant": j.variant,
                "depth": j.depth,
                "seed": j.seed,
                "error": j.error,
            }
            for j in result.jobs
            if not j.ok
        ],
    }
    for variant in spec.variants:
        for depth in spec.depths:
            finals = [
                j.final_energy
                for j in result.jobs
                if j.ok and j.variant == variant and j.depth == depth
            ]
            if not finals:
                continue
            labels = [
                j.fit.classification
                for j in result.jobs
                if j.ok and j.variant == variant and j.depth == depth and j.fit
            ]
            summary["cells"][f"{variant}/depth-{depth:03d}"] = {
                "median_final_energy": float(np.median(finals)),
                "classifications": {c: labels.count(c) for c in sorted(set(labels))},
                "stalled": sum(
                    bool(j.stall and j.stall.stalled)
                    for j in result.jobs
                    if j.ok and j.variant == variant and j.depth == depth
                ),
            }
    _write_json(
        os.path.join(result.out_dir, "summary.json"),
        summary,
        result.config_hash,
        None,
    )


def _subsample(count: int, cap: int) -> list[int]:
    if count <= cap:
        return list(range(count))
    return sorted({int(k) for k in np.linspace(0, count - 1, cap).round()})


# ---------------------------------------------------------------- output


def _config_hash(meta: dict) -> str:
    blob = json.dumps(meta, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _sweep_meta(G: WeightedGraph, spec: SweepSpec) -> dict:
    return {
        "graph_label": spec.graph_label,
        "nodes": G.n,
        "edges": int(G.indices.size // 2),
        "depths": list(spec.depths),
        "variants": list(spec.variants),
        "seeds": list(spec.seeds),
        "attention": [spec.attention.variant, spec.attention.leaky_slope],
        "heads": spec.heads,
        "hidden_dim": spec.hidden_dim,
        "input_dim": spec.input_dim,
        "output_dim": spec.output_dim,
        "feature_seed": spec.feature_seed,
        "feature_scale": spec.feature_scale,
        "energy_order": spec.energy_order,
        "version": graphenergy.__version__,
    }


def _csv_meta(config_hash: str, seed) -> list[str]:
    seed_part = "" if seed is None else f" seed={seed}"
    return [
        f"# config-hash={config_hash}{seed_part} "
        f"version={graphenergy.__version__}",
        f"# {MEASUREMENT_NOTE}",
    ]


def _write_csv(path, meta_lines, names, columns) -> None:
    columns = [np.asarray(c, dtype=float) for c in columns]
    with open(path, "w") as fh:
        for line in meta_lines:
            fh.write(line + "\n")
        fh.write(",".join(names) + "\n")
        for row in zip(*columns):
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def _read_series_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Two-column series reader tolerating '#' comments and one optional
    column-name row."""
    rows = []
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = [t for t in line.split(",") if t.strip()]
            try:
                rows.append([float(t) for t in tokens[:2]])
            except ValueError:
                if rows:
                    raise ValueError(f"{path}: non-numeric row {raw.strip()!r}")
                continue  # header row
    if not rows or any(len(r) < 2 for r in rows):
        raise ValueError(f"{path}: expected two numeric columns")
    data = np.asarray(rows)
    return data[:, 0], data[:, 1]


def _write_json(path, payload: dict, config_hash: str, seed) -> None:
    body = dict(payload)
    body["config_hash"] = config_hash
    if seed is not None:
        body["seed"] = seed
    body["version"] = graphenergy.__version__
    body["measurement"] = MEASUREMENT_NOTE
    with open(path, "w") as fh:
        json.dump(_jsonable(body), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        out = float(value)
        return None if np.isnan(out) else out
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def _fit_dict(fit: FitReport | None):
    if fit is None:
        return None
    def line(f):
        return None if f is None else {
            "slope": f.slope,
            "intercept": f.intercept,
            "r_squared": f.r_squared,
        }
    return {
        "law": fit.law,
        "exponent": fit.exponent,
        "intercept": fit.intercept,
        "r_squared": fit.r_squared,
        "window": list(fit.window),
        "classification": fit.classification,
        "power_fit": line(fit.power_fit),
        "exponential_fit": line(fit.exponential_fit),
    }


def _stall_dict(stall: StallVerdict | None):
    if stall is None:
        return None
    return {
        "stalled": stall.stalled,
        "energy_slope": stall.energy_slope,
        "median_tail_change": stall.median_tail_change,
        "change_trend": stall.change_trend,
        "tail_start": stall.tail_start,
        "threshold": stall.threshold,
    }


# ------------------------------------------------------------- argument


def _add_graph_source(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--edges", help="edge-list file; omit to generate")
    parser.add_argument(
        "--kind",
        choices=GENERATOR_KINDS,
        help="synthetic graph kind when --edges is absent "
        "(default: the sbm surrogate)",
    )
    parser.add_argument("--size", type=int, help="node count (path/ring/erdos-renyi)")
    parser.add_argument("--rows", type=int, help="grid2d rows")
    parser.add_argument("--cols", type=int, help="grid2d cols")
    parser.add_argument("--edge-prob", type=float, help="erdos-renyi edge probability")
    parser.add_argument(
        "--block-sizes", help="sbm: comma-separated block sizes, e.g. 50,50"
    )
    parser.add_argument(
        "--block-probs",
        help="sbm: semicolon-separated rows of comma-separated "
        "probabilities, e.g. 0.5,0.1;0.1,0.5",
    )
    parser.add_argument("--graph-seed", type=int, default=0)
    parser.add_argument("--retries", type=int, default=50)


def _synthetic_spec_from_args(args) -> SyntheticSpec:
    if args.kind is None:
        return surrogate_spec(args.graph_seed)
    kwargs = dict(kind=args.kind, seed=args.graph_seed, max_retries=args.retries)
    if args.kind in ("path", "ring", "erdos-renyi"):
        kwargs["size"] = args.size
    if args.kind == "grid2d":
        if args.rows is None or args.cols is None:
            raise SystemExit("grid2d needs --rows and --cols")
        kwargs["shape"] = (args.rows, args.cols)
    if args.kind == "erdos-renyi":
        kwargs["edge_prob"] = args.edge_prob
    if args.kind == "sbm":
        if not args.block_sizes or not args.block_probs:
            raise SystemExit("sbm needs --block-sizes and --block-probs")
        kwargs["block_sizes"] = tuple(
            int(s) for s in args.block_sizes.split(",") if s
        )
        kwargs["block_probs"] = tuple(
            tuple(float(p) for p in row.split(",") if p)
            for row in args.block_probs.split(";")
            if row
        )
    try:
        return SyntheticSpec(**kwargs)
    except (TypeError, ValueError) as exc:
        raise SystemExit(f"bad generator arguments: {exc}") from None


def _resolve_graph(args) -> tuple[WeightedGraph, str]:
    if args.edges:
        return load_edge_list(args.edges), os.path.basename(args.edges)
    spec = _synthetic_spec_from_args(args)
    label = spec.kind if args.kind else "sbm-surrogate"
    return generate_graph(spec), label


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--hidden-dim", type=int, default=32)
    parser.add_argument("--heads", type=int, default=1)
    parser.add_argument("--attention", choices=SCORE_VARIANTS, default="san")
    parser.add_argument("--leaky-slope", type=float, default=0.2)
    parser.add_argument("--input-dim", type=int, default=32)
    parser.add_argument("--output-dim", type=int, default=7)
    parser.add_argument("--feature-seed", type=int, default=DEFAULT_FEATURE_SEED)
    parser.add_argument("--feature-scale", type=float, default=1.0)


def _int_list(text: str) -> tuple[int, ...]:
    try:
        items = tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated int list: {text!r}")
    if not items:
        raise argparse.ArgumentTypeError("empty list")
    return items


def _expand_config(argv: list[str]) -> list[str]:
    """Splice ``--config FILE`` key/value lines in as long-form flags,
    ahead of explicit flags so the command line wins."""
    if "--config" not in argv:
        return argv
    at = argv.index("--config")
    if at + 1 >= len(argv):
        raise SystemExit("--config needs a file argument")
    path = argv[at + 1]
    tokens: list[str] = []
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace("=", " ", 1).split(None, 1)
            key = parts[0].strip().replace("_", "-")
            tokens.append(f"--{key}")
            if len(parts) > 1 and parts[1].strip():
                tokens.append(parts[1].strip())
    head, tail = argv[:at], argv[at + 2 :]
    insert_at = 1 if head else 0  # right after the subcommand name
    return head[:insert_at] + tokens + head[insert_at:] + tail


# ----------------------------------------------------------- subcommands


def cmd_sweep(args) -> int:
    G, label = _resolve_graph(args)
    attention = AttentionKind(variant=args.attention, leaky_slope=args.leaky_slope)
    spec = SweepSpec(
        depths=args.depths,
        variants=tuple(args.variants.split(",")),
        seeds=args.seeds,
        attention=attention,
        heads=args.heads,
        hidden_dim=args.hidden_dim,
        input_dim=args.input_dim,
        output_dim=args.output_dim,
        feature_seed=args.feature_seed,
        feature_scale=args.feature_scale,
        graph_label=label,
        energy_order=args.energy_order,
        dump_states=args.dump_states,
        write_cosine=not args.no_cosine,
    )
    ensure_directory(args.out)
    result = run_sweep(G, spec, out_dir=args.out, workers=args.workers)
    failed = [j for j in result.jobs if not j.ok]
    print(
        f"sweep: {len(result.jobs) - len(failed)}/{len(result.jobs)} jobs ok, "
        f"config-hash {result.config_hash}, output {args.out}"
    )
    for j in failed:
        print(f"  failed {j.variant}/depth-{j.depth}/seed-{j.seed}: {j.error}")
    return 0 if result.all_ok else 1


def cmd_flow(args) -> int:
    G, label = _resolve_graph(args)
    X0 = random_features(G.n, args.d, seed=args.feature_seed, scale=args.feature_scale)
    spec = FlowSpec(
        kind=args.flow,
        horizon=args.horizon,
        dt=args.dt,
        record_stride=args.stride,
    )
    simulate = {
        FLOW_HEAT: simulate_heat,
        FLOW_GATED: simulate_nonlocal,
        FLOW_NORMALIZED: simulate_preln_flow,
    }[args.flow]
    trajectory = simulate(G, X0, spec)
    series = energy_series(trajectory, args.energy_order, topology=G)

    meta = {
        "graph": label,
        "flow": args.flow,
        "horizon": args.horizon,
        "dt": args.dt,
        "feature_seed": args.feature_seed,
        "d": args.d,
        "energy_order": args.energy_order,
        "version": graphenergy.__version__,
    }
    config_hash = _config_hash(meta)
    ensure_directory(args.out)
    _write_csv(
        os.path.join(args.out, "energy.csv"),
        _csv_meta(config_hash, args.feature_seed),
        ("time", "energy"),
        (series.indices, series.values),
    )
    _write_csv(
        os.path.join(args.out, "trajectory.csv"),
        _csv_meta(config_hash, args.feature_seed),
        ("time", "dirichlet", "laplacian", "gate"),
        (trajectory.times, trajectory.dirichlet, trajectory.laplacian, trajectory.gate),
    )
    report: dict = {"flow": args.flow, "lambda_max": trajectory.lambda_max}
    try:
        fit = fit_decay(series)
        report["fit"] = _fit_dict(fit)
        print(
            f"flow {args.flow}: {fit.classification}, slope {fit.exponent:.4g}, "
            f"R^2 {fit.r_squared:.4f}"
        )
    except ValueError as exc:
        report["fit"] = None
        report["fit_error"] = str(exc)
        print(f"flow {args.flow}: fit unavailable ({exc})")
    if trajectory.norm_mass is not None:
        report["norm_mass_max_deviation"] = float(
            np.abs(trajectory.norm_mass - G.n).max()
        )
        scaled = np.sqrt(G.n * trajectory.dirichlet)
        report["sqrt_energy_slope"] = _sqrt_growth_slope(trajectory.times, scaled)
    _write_json(
        os.path.join(args.out, "report.json"), report, config_hash, args.feature_seed
    )
    return 0


def _sqrt_growth_slope(times: np.ndarray, scaled: np.ndarray) -> float:
    mask = times > 0
    if mask.sum() < 2:
        return 0.0
    return float(np.polyfit(times[mask], scaled[mask], 1)[0])


def cmd_prune(args) -> int:
    G, label = _resolve_graph(args)
    X = random_features(
        G.n, args.input_dim, seed=args.feature_seed, scale=args.feature_scale
    )
    attention = AttentionKind(variant=args.attention, leaky_slope=args.leaky_slope)
    rows = []
    for seed in args.seeds:
        cfg = ModelConfig(
            input_dim=args.input_dim,
            output_dim=args.output_dim,
            depth=args.depth,
            hidden_dim=args.hidden_dim,
            heads=args.heads,
            variant=args.variant,
            attention=attention,
            seed=seed,
        )
        params = init_model(cfg)
        for layer in args.layers:
            report = prune_layer_deviation(params, cfg, G, X, layer)
            rows.append((layer, seed, report.deviation, report.mean_cosine))

    meta = {
        "graph": label,
        "variant": args.variant,
        "depth": args.depth,
        "layers": list(args.layers),
        "seeds": list(args.seeds),
        "version": graphenergy.__version__,
    }
    config_hash = _config_hash(meta)
    medians = {
        layer: float(np.median([dev for lay, _, dev, _ in rows if lay == layer]))
        for layer in args.layers
    }
    print(f"prune deviations ({args.variant}, depth {args.depth}):")
    for layer in args.layers:
        print(f"  layer {layer:4d}: median deviation {medians[layer]:.6g}")
    if args.out:
        ensure_directory(args.out)
        _write_csv(
            os.path.join(args.out, "prune.csv"),
            _csv_meta(config_hash, None),
            ("layer", "seed", "deviation", "mean_cosine"),
            tuple(np.array(col, dtype=float) for col in zip(*rows)),
        )
        _write_json(
            os.path.join(args.out, "report.json"),
            {"medians": {str(k): v for k, v in medians.items()}, **meta},
            config_hash,
            None,
        )
    return 0


def cmd_gen(args) -> int:
    spec = _synthetic_spec_from_args(args)
    G = generate_graph(spec)
    write_edge_list(args.out, G)
    stats = dataset_stats(G)
    print(
        f"wrote {args.out}: nodes {stats.nodes}, edges {stats.edges}, "
        f"components {stats.components}"
    )
    return 0


def cmd_stats(args) -> int:
    G, label = _resolve_graph(args)
    features = load_features(args.features, G.n) if args.features else None
    labels = load_labels(args.labels, G.n) if args.labels else None
    stats = dataset_stats(G, features=features, labels=labels)
    parts = [f"nodes {stats.nodes}", f"edges {stats.edges}"]
    if stats.feature_dim is not None:
        parts.append(f"features {stats.feature_dim}")
    if stats.class_count is not None:
        parts.append(f"classes {stats.class_count}")
    parts.append(f"components {stats.components}")
    print(f"{label}: " + ", ".join(parts))
    return 0


def cmd_fit(args) -> int:
    indices, values = _read_series_csv(args.series)
    series = EnergySeries(
        indices=indices, values=values, order=args.energy_order, source="file"
    )
    window = "auto"
    if args.window != "auto":
        lo, sep, hi = args.window.partition(":")
        try:
            window = (float(lo), float(hi))
        except ValueError:
            raise SystemExit(
                f"--window must be 'auto' or 'lo:hi', got {args.window!r}"
            ) from None
        if not sep:
            raise SystemExit("--window range needs a colon, e.g. 10:100")
    fit = fit_decay(series, window=window)
    payload = _fit_dict(fit)
    config_hash = _config_hash(
        {"series": os.path.basename(args.series), "window": args.window}
    )
    if args.out:
        _write_json(args.out, {"fit": payload}, config_hash, None)
    print(
        f"{fit.classification}: law {fit.law}, slope {fit.exponent:.6g}, "
        f"R^2 {fit.r_squared:.4f}, window [{fit.window[0]:g}, {fit.window[1]:g}]"
    )
    return 0


def cmd_similarity(args) -> int:
    names = sorted(
        name
        for name in os.listdir(args.states)
        if name.startswith("layer-") and name.endswith(".csv")
    )
    if not names:
        raise SystemExit(f"{args.states}: no layer-*.csv files")
    states = tuple(load_matrix(os.path.join(args.states, name)) for name in names)
    matrix = cosine_similarity_matrix(SimpleNamespace(states=states))
    config_hash = _config_hash({"states": names})
    _write_csv(
        args.out,
        _csv_meta(config_hash, None),
        tuple(name[:-4] for name in names),
        tuple(matrix[:, c] for c in range(matrix.shape[1])),
    )
    print(f"wrote {args.out}: {matrix.shape[0]}x{matrix.shape[1]} cosine matrix")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphenergy",
        description="initialization-time energy diagnostics for attention "
        "message passing on graphs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="variant x depth x seed forward sweep")
    _add_graph_source(p)
    _add_model_flags(p)
    p.add_argument("--depths", type=_int_list, default=DEFAULT_DEPTHS)
    p.add_argument("--variants", default=",".join(MODEL_VARIANTS))
    p.add_argument("--seeds", type=_int_list, default=DEFAULT_SEEDS)
    p.add_argument("--energy-order", type=int, default=2)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--dump-states", action="store_true")
    p.add_argument("--no-cosine", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("flow", help="integrate a feature flow")
    _add_graph_source(p)
    p.add_argument("--flow", choices=FLOW_KINDS, required=True)
    p.add_argument("--horizon", type=float, required=True)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--d", type=int, default=4, help="feature columns")
    p.add_argument("--feature-seed", type=int, default=DEFAULT_FEATURE_SEED)
    p.add_argument("--feature-scale", type=float, default=1.0)
    p.add_argument("--energy-order", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("prune", help="single-layer pruning deviation scan")
    _add_graph_source(p)
    _add_model_flags(p)
    p.add_argument("--variant", choices=MODEL_VARIANTS, default="pre_ln")
    p.add_argument("--depth", type=int, default=32)
    p.add_argument("--layers", type=_int_list, required=True)
    p.add_argument("--seeds", type=_int_list, default=(0,))
    p.add_argument("--out")
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("gen", help="write a synthetic graph to an edge list")
    _add_graph_source(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("stats", help="dataset summary counts")
    _add_graph_source(p)
    p.add_argument("--features")
    p.add_argument("--labels")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("fit", help="fit a decay law to a series CSV")
    p.add_argument("--series", required=True)
    p.add_argument("--window", default="auto", help="'auto' or 'lo:hi'")
    p.add_argument("--energy-order", type=int, default=2)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("similarity", help="cosine matrix of dumped states")
    p.add_argument("--states", required=True, help="directory of layer-*.csv")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_similarity)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    argv = _expand_config(argv)
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())