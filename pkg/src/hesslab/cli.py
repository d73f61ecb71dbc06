"""Command-line front end.

Subcommands
    slq      estimate a spectral density from a matrix CSV or a built-in case
    heatmap  pairwise distance matrix and scalar heterogeneity index
    quad     gradient-descent / Adam runs on the quadratic benchmarks
    mlp      neural-network experiments driven by a key=value config file
    rerun    repeat a run from an emitted manifest

Every run writes a ``manifest.json`` echoing the fully resolved
configuration; re-running from the manifest reproduces the other output
files byte for byte. Exit codes: 0 success, 2 usage or input error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import io, nnlab, quadlab
from .errors import InputError, NumericalError
from .operators import BlockPartition, block_restrict, load_dense_csv
from .slq import ProbeConfig, slq_density
from .spectra import GridSpec, heterogeneity_report, normalize_axis
from .nnlab.training import TrainerSpec

DEFAULT_OUT_ENV = "HESSLAB_OUT"


def _out_dir(args) -> Path:
    out = args.out or os.environ.get(DEFAULT_OUT_ENV) or "hesslab-out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------- slq ----------


def _add_probe_flags(p):
    p.add_argument("--m", type=int, default=100, help="Lanczos steps per probe")
    p.add_argument("--num-probes", type=int, default=10)
    p.add_argument("--sigma", type=float, default=None,
                   help="blur width; default 1%% of the node span")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--probe", choices=["gaussian", "rademacher"], default="gaussian")
    p.add_argument("--reorth", choices=["on", "off"], default="on")


def resolve_slq(args) -> dict:
    if bool(args.matrix) == bool(args.case):
        raise InputError("provide exactly one of --matrix or --case")
    if args.sigma is not None and args.sigma <= 0:
        raise InputError("--sigma must be positive")
    if args.block is not None and not args.partition and not args.case:
        raise InputError("--block needs --partition when the operator comes from a CSV")
    return {
        "matrix": args.matrix,
        "case": args.case,
        "block": args.block,
        "partition": args.partition,
        "m": args.m,
        "num_probes": args.num_probes,
        "sigma": args.sigma,
        "seed": args.seed,
        "probe": args.probe,
        "reorth": args.reorth == "on" if isinstance(args.reorth, str) else args.reorth,
    }


def _operator_from_config(config):
    if config.get("matrix"):
        op = load_dense_csv(config["matrix"])
        part = (BlockPartition.from_json(config["partition"])
                if config.get("partition") else None)
    else:
        problem = quadlab.build_case(int(config["case"]), seed=int(config["seed"]))
        op = problem.operator()
        part = problem.partition
    return op, part


def run_slq(config: dict, outdir: Path) -> None:
    op, part = _operator_from_config(config)
    label = "full"
    if config.get("block") is not None:
        if part is None:
            raise InputError("--block needs a partition")
        op = block_restrict(op, part, int(config["block"]))
        label = f"block-{config['block']}"
    probe = ProbeConfig(
        num_probes=int(config["num_probes"]), steps=int(config["m"]),
        distribution=config["probe"], seed=int(config["seed"]),
        reorth=bool(config["reorth"]),
    )
    density = slq_density(op, probe, sigma=config["sigma"], label=label)
    io.write_density_csv(outdir / "density.csv", density)
    io.write_density_json(outdir / "density.json", density)
    io.write_manifest(outdir / "manifest.json", "slq", config)


# ---------- heatmap ----------


def resolve_heatmap(args) -> dict:
    sources = [bool(args.densities), bool(args.matrix), bool(args.case)]
    if sum(sources) != 1:
        raise InputError("provide exactly one of --densities, --matrix or --case")
    if args.matrix and not args.partition:
        raise InputError("--matrix needs --partition to define the blocks")
    return {
        "densities": args.densities,
        "matrix": args.matrix,
        "partition": args.partition,
        "case": args.case,
        "normalize_10th": args.normalize_10th,
        "m": args.m,
        "num_probes": args.num_probes,
        "sigma": args.sigma,
        "seed": args.seed,
        "probe": args.probe,
        "reorth": args.reorth == "on" if isinstance(args.reorth, str) else args.reorth,
        "grid_points": args.grid_points,
    }


def run_heatmap(config: dict, outdir: Path) -> None:
    if config.get("densities"):
        ddir = Path(config["densities"])
        files = sorted(ddir.glob("*.json"))
        files = [f for f in files if f.name != "manifest.json"]
        if len(files) < 2:
            raise InputError(f"need at least 2 density JSON files in {ddir}, found {len(files)}")
        densities = [io.read_density_json(f) for f in files]
        for f, d in zip(files, densities):
            if not d.label:
                d.label = f.stem
    else:
        op, part = _operator_from_config(config)
        if part is None or part.num_blocks < 2:
            raise InputError("heatmap needs a partition with at least 2 blocks")
        probe = ProbeConfig(
            num_probes=int(config["num_probes"]), steps=int(config["m"]),
            distribution=config["probe"], seed=int(config["seed"]),
            reorth=bool(config["reorth"]),
        )
        densities = []
        for l in range(1, part.num_blocks + 1):
            sub = block_restrict(op, part, l)
            sub_seed = int(np.random.SeedSequence([int(config["seed"]), l]).generate_state(1)[0])
            cfg = ProbeConfig(probe.num_probes, probe.steps, probe.distribution,
                              sub_seed, probe.reorth)
            densities.append(slq_density(sub, cfg, sigma=config["sigma"], label=f"block-{l}"))
    if config.get("normalize_10th"):
        densities = [normalize_axis(d, k=10) for d in densities]
    grid = GridSpec.covering(densities, points=int(config.get("grid_points") or 2048))
    report = heterogeneity_report(densities, grid)
    io.write_heatmap(outdir / "heatmap.csv", outdir / "report.json", report)
    io.write_manifest(outdir / "manifest.json", "heatmap", config)


# ---------- quad ----------

VERIFY_CHOICES = ("gd-bound", "adam-bound", "cycle")


def resolve_quad(args) -> dict:
    if args.case is None:
        raise InputError("--case is required (1, 2, 3 or 4)")
    if args.optimizer == "adam" and args.eta == "auto":
        raise InputError("adam has no auto step size; give --eta")
    if args.verify == "gd-bound" and args.optimizer != "gd":
        raise InputError("--verify gd-bound applies to --optimizer gd")
    if args.verify in ("adam-bound", "cycle") and args.optimizer != "adam":
        raise InputError(f"--verify {args.verify} applies to --optimizer adam")
    if args.verify == "adam-bound" and args.beta2 != 1.0:
        raise InputError("--verify adam-bound needs --beta2 1.0")
    eta = args.eta if args.eta == "auto" else float(args.eta)
    return {
        "case": args.case,
        "spectra": args.spectra,
        "rotation": args.rotation,
        "optimizer": args.optimizer,
        "beta2": args.beta2,
        "eta": eta,
        "steps": args.steps,
        "seed": args.seed,
        "verify": args.verify,
    }


def run_quad(config: dict, outdir: Path) -> None:
    problem = quadlab.build_case(
        int(config["case"]), seed=int(config["seed"]),
        rotation=config.get("rotation") or "orthogonal",
        spectra_files=config.get("spectra"),
    )
    w0 = quadlab.gaussian_init(problem.dim, int(config["seed"]))
    steps = int(config["steps"])
    if config["optimizer"] == "gd":
        traj = quadlab.run_gd(problem, eta=config["eta"], steps=steps, w0=w0)
    else:
        traj = quadlab.run_adam(problem, float(config["eta"]), float(config["beta2"]),
                                steps=steps, w0=w0)
    io.write_trajectory_csv(outdir / "trajectory.csv", traj)
    if config.get("verify"):
        if config["verify"] == "gd-bound":
            report = quadlab.verify_gd_lower_bound(traj, problem.kappa)
        elif config["verify"] == "adam-bound":
            report = quadlab.verify_adam_upper_bound(problem, w0, traj)
        else:
            non_converged, liminf = quadlab.detect_limit_cycle(traj)
            report = quadlab.TheoryReport(
                kind="limit_cycle",
                constants={"liminf_estimate": liminf, "beta2": config["beta2"]},
                bound=1e-8 * float(traj.errors[0]),
                worst_measured=liminf,
                satisfied=bool(non_converged),
                flags=["non_converged" if non_converged else "converged"],
            )
        io.write_theory_report(outdir / "report.json", report)
    io.write_manifest(outdir / "manifest.json", "quad", config)


# ---------- mlp ----------


def parse_config_file(path) -> dict:
    """Plain ``key = value`` lines; '#' starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read config file {path}: {exc}") from exc
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise InputError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _take(cfg: dict, key: str, conv, default=None, required=False):
    if key not in cfg:
        if required:
            raise InputError(f"config is missing required key {key!r}")
        return default
    raw = cfg.pop(key)
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise InputError(f"config key {key!r} has invalid value {raw!r}: {exc}") from exc


def _floats(raw) -> list[float]:
    return [float(tok) for tok in str(raw).replace(",", " ").split()]


def _ints(raw) -> list[int]:
    return [int(tok) for tok in str(raw).replace(",", " ").split()]


def _load_mlp_dataset(cfg: dict):
    idx_images = _take(cfg, "idx-images", str)
    idx_labels = _take(cfg, "idx-labels", str)
    n_per_class = _take(cfg, "n-per-class", int, 50)
    n_classes = _take(cfg, "n-classes", int, 2)
    dim = _take(cfg, "dim", int, 64)
    data_seed = _take(cfg, "data-seed", int, 0)
    if idx_images or idx_labels:
        if not (idx_images and idx_labels):
            raise InputError("idx-images and idx-labels must be given together")
        return nnlab.load_idx(idx_images, idx_labels)
    return nnlab.generate_cluster_data(n_per_class, n_classes, dim, seed=data_seed)


def run_mlp(config: dict, outdir: Path) -> None:
    cfg = dict(config["options"])
    sub = config["subcommand"]
    if sub == "blockdiag":
        _run_mlp_blockdiag(cfg, outdir)
    elif sub == "scaling":
        _run_mlp_scaling(cfg, outdir)
    elif sub == "slq-net":
        _run_mlp_slqnet(cfg, outdir)
    else:
        raise InputError(f"unknown mlp subcommand {sub!r}")
    io.write_manifest(outdir / "manifest.json", "mlp", config)


def _reject_unknown(cfg: dict) -> None:
    if cfg:
        raise InputError(f"unknown config keys: {', '.join(sorted(cfg))}")


def _run_mlp_blockdiag(cfg: dict, outdir: Path) -> None:
    data = _load_mlp_dataset(cfg)
    width = _take(cfg, "width", int, 8)
    activation = _take(cfg, "activation", str, "tanh")
    steps = _take(cfg, "steps", int, 1000)
    eta = _take(cfg, "eta", float, 1e-4)
    optimizer = _take(cfg, "optimizer", str, "adamw")
    batch = _take(cfg, "batch-size", int, data.n)
    seed = _take(cfg, "seed", int, 0)
    checkpoints = _take(cfg, "checkpoints", _ints, [0, steps])
    _reject_unknown(cfg)
    spec = TrainerSpec(optimizer=optimizer, eta=eta, steps=steps,
                       batch_size=min(batch, data.n), seed=seed)
    _, _, records = nnlab.block_dominance_experiment(
        data, width=width, activation=activation, spec=spec,
        checkpoints=checkpoints, seed=seed,
    )
    io.write_csv(outdir / "dominance.csv", ["step", "dominance", "accuracy"], records)


def _run_mlp_scaling(cfg: dict, outdir: Path) -> None:
    data = _load_mlp_dataset(cfg)
    c_values = _take(cfg, "c-values", _floats, [1.0, 5.0, 10.0])
    lr_grid = _take(cfg, "lr-grid", _floats, list(nnlab.experiments.DEFAULT_LR_GRID))
    widths = _take(cfg, "widths", _ints, list(nnlab.experiments.DEFAULT_WIDTHS))
    activation = _take(cfg, "activation", str, "relu")
    steps = _take(cfg, "steps", int, 400)
    batch = _take(cfg, "batch-size", int, 128)
    seed = _take(cfg, "seed", int, 0)
    m = _take(cfg, "lanczos-steps", int, 100)
    num_probes = _take(cfg, "num-probes", int, 10)
    _reject_unknown(cfg)
    probe = ProbeConfig(num_probes=num_probes, steps=m, seed=seed)
    rows = nnlab.scaling_experiment(
        c_values, lr_grid, data, seed=seed, widths=widths, activation=activation,
        steps=steps, batch_size=batch, probe=probe,
    )
    io.write_csv(
        outdir / "scaling.csv",
        ["scale", "js0", "best_sgd_accuracy", "best_adamw_accuracy"],
        [(r.scale, r.js0, r.best_sgd_accuracy, r.best_adamw_accuracy) for r in rows],
    )
    io.write_json(outdir / "scaling.json", [r.to_dict() for r in rows])


def _run_mlp_slqnet(cfg: dict, outdir: Path) -> None:
    data = _load_mlp_dataset(cfg)
    widths = _take(cfg, "widths", _ints, [32])
    activation = _take(cfg, "activation", str, "tanh")
    scale = _take(cfg, "scale", float, 1.0)
    seed = _take(cfg, "seed", int, 0)
    m = _take(cfg, "lanczos-steps", int, 100)
    num_probes = _take(cfg, "num-probes", int, 10)
    train_steps = _take(cfg, "train-steps", int, 0)
    eta = _take(cfg, "eta", float, 1e-3)
    optimizer = _take(cfg, "optimizer", str, "adamw")
    batch = _take(cfg, "batch-size", int, data.n)
    _reject_unknown(cfg)
    from .seeding import derive_rng

    model = nnlab.MlpClassifier(data.dim, widths, data.num_classes, activation, scale)
    w = model.init_params(derive_rng(seed, "scaling-init"))
    if train_steps > 0:
        spec = TrainerSpec(optimizer=optimizer, eta=eta, steps=train_steps,
                           batch_size=min(batch, data.n), seed=seed)
        w, _ = nnlab.train(model, data, spec, w0=w)
    probe = ProbeConfig(num_probes=num_probes, steps=m, seed=seed)
    densities = nnlab.experiments.init_blockwise_densities(model, data, w, probe)
    for density in densities:
        io.write_density_json(outdir / f"{density.label}.json", density)
    report = heterogeneity_report(densities)
    io.write_heatmap(outdir / "heatmap.csv", outdir / "report.json", report)


# ---------- argument parsing and dispatch ----------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hesslab", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("slq", help="spectral density of a symmetric operator")
    p.add_argument("--matrix", help="dense symmetric matrix CSV")
    p.add_argument("--case", type=int, choices=[1, 2, 3, 4],
                   help="built-in quadratic benchmark Hessian")
    p.add_argument("--block", type=int, help="restrict to this partition block (1-based)")
    p.add_argument("--partition", help="JSON list of 1-based inclusive [start, end] ranges")
    _add_probe_flags(p)
    p.add_argument("--out")

    p = sub.add_parser("heatmap", help="pairwise JS distances between block densities")
    p.add_argument("--densities", help="directory of density JSON files")
    p.add_argument("--matrix", help="dense symmetric matrix CSV")
    p.add_argument("--partition", help="partition JSON for --matrix")
    p.add_argument("--case", type=int, choices=[1, 2, 3, 4])
    p.add_argument("--normalize-10th", action="store_true",
                   help="rescale each density by its 10th largest node first")
    p.add_argument("--grid-points", type=int, default=2048)
    _add_probe_flags(p)
    p.add_argument("--out")

    p = sub.add_parser("quad", help="optimizer runs on the quadratic benchmarks")
    p.add_argument("--case", type=int, choices=[1, 2, 3, 4])
    p.add_argument("--spectra", nargs="+",
                   help="eigenvalue CSV files overriding the bundled case 1/2 pools")
    p.add_argument("--rotation", choices=["orthogonal", "gaussian", "none"],
                   default="orthogonal")
    p.add_argument("--optimizer", choices=["gd", "adam"], required=True)
    p.add_argument("--beta2", type=float, default=1.0)
    p.add_argument("--eta", default="auto")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--verify", choices=list(VERIFY_CHOICES))
    p.add_argument("--out")

    p = sub.add_parser("mlp", help="neural-network experiments from a config file")
    p.add_argument("subcommand", choices=["blockdiag", "scaling", "slq-net"])
    p.add_argument("--config", required=True, help="key = value config file")
    p.add_argument("--out")

    p = sub.add_parser("rerun", help="repeat a run from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out")

    return parser


RUNNERS = {
    "slq": run_slq,
    "heatmap": run_heatmap,
    "quad": run_quad,
    "mlp": run_mlp,
}

RESOLVERS = {
    "slq": resolve_slq,
    "heatmap": resolve_heatmap,
    "quad": resolve_quad,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        outdir = _out_dir(args)
        if args.command == "rerun":
            command, config = io.read_manifest(args.manifest)
            if command not in RUNNERS:
                raise InputError(f"manifest names unknown command {command!r}")
            RUNNERS[command](config, outdir)
        elif args.command == "mlp":
            config = {"subcommand": args.subcommand,
                      "options": parse_config_file(args.config)}
            run_mlp(config, outdir)
        else:
            config = RESOLVERS[args.command](args)
            RUNNERS[args.command](config, outdir)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
