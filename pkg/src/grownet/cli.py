"""Command-line interface.

Subcommands: make-dataset, grow, baseline, compare, export-dot. Every run
writes a manifest next to its outputs with the effective configuration and
seed; re-running a command with ``--config manifest.json`` reproduces the
outputs byte for byte (timestamps aside).

Exit codes: 0 success, 2 configuration error, 3 input/output or format
error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .activations import ActivationKind
from .baselines import (
    envelope,
    envelope_best_complexity,
    poly_feature_count,
    poly_fit,
    sweep_standard,
)
from .data import PgmError, brightness_dataset, load_pgm, xy_dataset
from .network import load_network, parse_arch, save_network, standard_net, to_dot
from .search import SearchConfig, grow, trajectory_to_csv
from .training import TrainConfig, TrainingMatrix

SEED_ENV_VAR = "GROWNET_SEED"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


class ConfigError(Exception):
    pass


class InputError(Exception):
    pass


class NumericError(Exception):
    pass


# ---------------------------------------------------------------------------
# config file / manifest plumbing


def _load_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"config {path} is not valid JSON: {exc}") from exc
    if isinstance(doc, dict) and isinstance(doc.get("config"), dict):
        doc = doc["config"]  # a manifest: reuse its effective config
    if not isinstance(doc, dict):
        raise InputError(f"config {path} must hold a JSON object")
    return doc


def _effective(args: argparse.Namespace, names: list[str], defaults: dict) -> dict:
    """Merge defaults <- config file <- explicit flags for ``names``."""
    merged = dict(defaults)
    if getattr(args, "config", None):
        file_cfg = _load_config_file(args.config)
        unknown = set(file_cfg) - set(names)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged.update(file_cfg)
    for name in names:
        val = getattr(args, name, None)
        if val is not None:
            merged[name] = val
    return merged


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}") from None


def _write_manifest(path: Path, command: str, config: dict, inputs: dict, outputs: dict, started: str) -> None:
    doc = {
        "command": command,
        "config": config,
        "seed": config.get("seed"),
        "inputs": inputs,
        "outputs": outputs,
        "artifact_version": __version__,
        "started_at": started,
        "finished_at": datetime.now(timezone.utc).isoformat(),
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    os.replace(tmp, path)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _load_matrix(path: str) -> TrainingMatrix:
    try:
        return TrainingMatrix.load_csv(path)
    except OSError as exc:
        raise InputError(f"cannot read dataset {path}: {exc}") from exc
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _fmt(value: float) -> str:
    return repr(float(value))


# ---------------------------------------------------------------------------
# make-dataset


def _cmd_make_dataset(args: argparse.Namespace) -> int:
    started = _now()
    names = ["mode", "points", "out", "image"]
    cfg = _effective(args, names, {"mode": "brightness", "points": 5})
    cfg.setdefault("image", args.image)
    cfg.setdefault("out", args.out)
    if cfg.get("out") is None:
        raise ConfigError("--out is required")
    try:
        img = load_pgm(cfg["image"])
    except OSError as exc:
        raise InputError(f"cannot read image {cfg['image']}: {exc}") from exc

    if cfg["mode"] == "brightness":
        try:
            matrix = brightness_dataset(img, int(cfg["points"]))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    elif cfg["mode"] == "xy":
        matrix = xy_dataset(img)
    else:
        raise ConfigError(f"unknown mode {cfg['mode']!r}")

    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    matrix.save_csv(out)
    _write_manifest(
        out.with_name(out.name + ".manifest.json"),
        "make-dataset",
        cfg,
        {"image": str(cfg["image"])},
        {"dataset": str(out)},
        started,
    )
    print(f"wrote {out}: {matrix.n_rows} rows, {matrix.n_inputs} inputs")
    return EXIT_OK


# ---------------------------------------------------------------------------
# grow


_GROW_DEFAULTS = {
    "epsilon": 0.006,
    "candidates": 3,
    "delta_steps": 1000,
    "learning_rate": 1e-3,
    "optimizer": "adam",
    "batch_size": None,
    "budget_ratios": "1,3,5",
    "limit_complexity": None,
    "max_neurons_added": 4,
    "target_error": None,
    "init_noise_sigma": 1e-4,
    "quadrature_nodes": 257,
    "jobs": 1,
    "activation": "softsquare",
}


def _search_config(cfg: dict) -> SearchConfig:
    try:
        ratios = tuple(int(v) for v in str(cfg["budget_ratios"]).split(","))
        train_cfg = TrainConfig(
            optimizer=cfg["optimizer"],
            learning_rate=float(cfg["learning_rate"]),
            batch_size=None if cfg["batch_size"] in (None, "auto") else int(cfg["batch_size"]),
            seed=int(cfg["seed"]),
            budget_unit=int(cfg["delta_steps"]),
        )
        return SearchConfig(
            train_cfg=train_cfg,
            epsilon=float(cfg["epsilon"]),
            candidates_k=int(cfg["candidates"]),
            budget_ratios=ratios,
            complexity_limit=None if cfg["limit_complexity"] is None else int(cfg["limit_complexity"]),
            max_neurons_added=int(cfg["max_neurons_added"]),
            target_error=None if cfg["target_error"] is None else float(cfg["target_error"]),
            init_noise_sigma=float(cfg["init_noise_sigma"]),
            quadrature_nodes=int(cfg["quadrature_nodes"]),
            jobs=int(cfg["jobs"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _cmd_grow(args: argparse.Namespace) -> int:
    started = _now()
    names = list(_GROW_DEFAULTS) + ["seed", "init", "dataset", "out_dir"]
    cfg = _effective(args, names, dict(_GROW_DEFAULTS))
    cfg.setdefault("seed", _default_seed())
    for required in ("dataset", "out_dir", "init"):
        if cfg.get(required) is None:
            raise ConfigError(f"--{required.replace('_', '-')} is required")

    data = _load_matrix(cfg["dataset"])
    scfg = _search_config(cfg)
    try:
        spec = parse_arch(cfg["init"])
        activation = ActivationKind.from_name(cfg["activation"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if spec.n_inputs != data.n_inputs:
        raise ConfigError(
            f"architecture expects {spec.n_inputs} inputs, dataset has {data.n_inputs}"
        )
    rng = np.random.default_rng(np.random.SeedSequence([int(cfg["seed"]) & ((1 << 64) - 1), 7]))
    net = standard_net(spec, default_activation=activation, rng=rng)

    result = grow(net, data, scfg)
    if any(not math.isfinite(st.error) for st in result.accepted):
        raise NumericError("search produced a non-finite error")

    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    trajectory_to_csv(result.trajectory, out_dir / "trajectory.csv")
    with open(out_dir / "frontier.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("complexity,error,snapshot\n")
        for complexity, error, sid in result.pareto:
            name = f"network_{sid:04d}.json"
            save_network(result.accepted[sid].network, out_dir / name)
            fh.write(f"{complexity},{_fmt(error)},{name}\n")
    save_network(result.best_network, out_dir / "best_network.json")
    _write_manifest(
        out_dir / "manifest.json",
        "grow",
        cfg,
        {"dataset": str(cfg["dataset"])},
        {
            "trajectory": str(out_dir / "trajectory.csv"),
            "frontier": str(out_dir / "frontier.csv"),
            "best_network": str(out_dir / "best_network.json"),
        },
        started,
    )
    best = result.best_network
    print(
        f"grow finished: {len(result.trajectory)} trajectory points, "
        f"{len(result.pareto)} frontier points, best complexity {best.complexity()}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# baseline


_BASELINE_DEFAULTS = {
    "poly": None,
    "sweep": None,
    "repeats": 10,
    "delta_steps": 1000,
    "learning_rate": 1e-3,
    "optimizer": "adam",
    "batch_size": None,
    "budget_multiplier": 5,
    "jobs": 1,
    "activation": "softsquare",
}


def _parse_range(text: str) -> list[int]:
    lo, _, hi = text.partition("-")
    try:
        if hi:
            step = 1
            if ":" in hi:
                hi, _, s = hi.partition(":")
                step = int(s)
            return list(range(int(lo), int(hi) + 1, step))
        return [int(lo)]
    except ValueError:
        raise ConfigError(f"bad range {text!r}") from None


def _sweep_specs(text: str, n_inputs: int):
    kind, _, rest = text.partition(":")
    if kind == "three-layer":
        parts = rest.split(",")
        if len(parts) != 2:
            raise ConfigError("sweep three-layer wants H1RANGE,H2RANGE")
        from .network import ThreeLayer

        return [
            ThreeLayer(n_inputs, h1, h2)
            for h1 in _parse_range(parts[0])
            for h2 in _parse_range(parts[1])
        ]
    if kind == "max-full":
        from .network import MaxFullyConnected

        return [MaxFullyConnected(n_inputs, m) for m in _parse_range(rest)]
    raise ConfigError(f"unknown sweep kind {kind!r}")


def _cmd_baseline(args: argparse.Namespace) -> int:
    started = _now()
    names = list(_BASELINE_DEFAULTS) + ["seed", "dataset", "out"]
    cfg = _effective(args, names, dict(_BASELINE_DEFAULTS))
    cfg.setdefault("seed", _default_seed())
    for required in ("dataset", "out"):
        if cfg.get(required) is None:
            raise ConfigError(f"--{required} is required")
    if (cfg["poly"] is None) == (cfg["sweep"] is None):
        raise ConfigError("exactly one of --poly or --sweep is required")

    data = _load_matrix(cfg["dataset"])
    rows: list[tuple[str, float, float]] = []
    if cfg["poly"] is not None:
        try:
            degrees = [int(v) for v in str(cfg["poly"]).split(",")]
        except ValueError:
            raise ConfigError(f"bad --poly {cfg['poly']!r}") from None
        for d in degrees:
            try:
                model, err = poly_fit(data, d)
            except ValueError as exc:
                raise NumericError(str(exc)) from exc
            rows.append((f"poly:{d}", poly_feature_count(data.n_inputs, d), err))
            if model.rank_deficient:
                print(f"warning: poly:{d} fit is rank deficient", file=sys.stderr)
    else:
        specs = _sweep_specs(str(cfg["sweep"]), data.n_inputs)
        try:
            activation = ActivationKind.from_name(cfg["activation"])
            tcfg = TrainConfig(
                optimizer=cfg["optimizer"],
                learning_rate=float(cfg["learning_rate"]),
                batch_size=None if cfg["batch_size"] in (None, "auto") else int(cfg["batch_size"]),
                seed=int(cfg["seed"]),
                budget_unit=int(cfg["delta_steps"]),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        results = sweep_standard(
            data,
            specs,
            int(cfg["repeats"]),
            tcfg,
            budget_multiplier=int(cfg["budget_multiplier"]),
            jobs=int(cfg["jobs"]),
            activation=activation,
        )
        rows = [(str(r.spec), r.complexity, r.error) for r in results]

    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["spec", "complexity", "error"])
        for spec, complexity, err in rows:
            writer.writerow([spec, int(complexity), _fmt(err)])
    _write_manifest(
        out.with_name(out.name + ".manifest.json"),
        "baseline",
        cfg,
        {"dataset": str(cfg["dataset"])},
        {"results": str(out)},
        started,
    )
    print(f"wrote {out}: {len(rows)} rows")
    return EXIT_OK


# ---------------------------------------------------------------------------
# compare


def _read_points_csv(path: str) -> list[tuple[float, float]]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise InputError(f"{path}: empty file")
            header = [h.strip() for h in header]
            try:
                ci = header.index("complexity")
                ei = header.index("error")
            except ValueError:
                raise InputError(f"{path}: need complexity and error columns") from None
            pts = []
            for row in reader:
                if row:
                    pts.append((float(row[ci]), float(row[ei])))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc
    if not pts:
        raise InputError(f"{path}: no data rows")
    return pts


def _cmd_compare(args: argparse.Namespace) -> int:
    started = _now()
    standard = _read_points_csv(args.standard)
    optimized = _read_points_csv(args.optimized)
    curve = envelope(standard)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write("error,standard_best_complexity,optimized_complexity\n")
        for complexity, error in sorted(optimized):
            std = envelope_best_complexity(curve, error)
            std_text = "inf" if math.isinf(std) else _fmt(std)
            fh.write(f"{_fmt(error)},{std_text},{_fmt(complexity)}\n")
    _write_manifest(
        out.with_name(out.name + ".manifest.json"),
        "compare",
        {"standard": args.standard, "optimized": args.optimized, "out": str(out)},
        {"standard": args.standard, "optimized": args.optimized},
        {"report": str(out)},
        started,
    )
    print(f"wrote {out}: {len(optimized)} rows")
    return EXIT_OK


# ---------------------------------------------------------------------------
# export-dot


def _cmd_export_dot(args: argparse.Namespace) -> int:
    try:
        net = load_network(args.network)
    except OSError as exc:
        raise InputError(f"cannot read network {args.network}: {exc}") from exc
    except (ValueError, json.JSONDecodeError) as exc:
        raise InputError(f"{args.network}: {exc}") from exc
    text = to_dot(net, hide_inputs=args.hide_inputs, precision=args.precision)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="grownet",
        description="Grow and prune DAG feedforward networks; build datasets and baselines.",
    )
    parser.add_argument("--version", action="version", version=f"grownet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-dataset", help="turn a PGM image into a training CSV")
    p.add_argument("image", help="P2/P5 PGM file, maxval 255")
    p.add_argument("--mode", choices=["brightness", "xy"])
    p.add_argument("--points", type=int, help="previous points for brightness mode (2..18)")
    p.add_argument("--out", help="output CSV path")
    p.add_argument("--config", help="JSON config or manifest to take defaults from")
    p.set_defaults(func=_cmd_make_dataset)

    p = sub.add_parser("grow", help="run the growing-architecture search")
    p.add_argument("dataset", nargs="?", help="training CSV")
    p.add_argument("--init", help="starting architecture, e.g. three-layer:4,8,8")
    p.add_argument("--out-dir", dest="out_dir", help="directory for run outputs")
    p.add_argument("--epsilon", type=float, help="error-growth guard (default 0.006)")
    p.add_argument("--candidates", type=int, help="edges tried per prune step (default 3)")
    p.add_argument("--delta-steps", dest="delta_steps", type=int, help="optimizer steps per budget unit")
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--optimizer", choices=["adam", "sgd_momentum"])
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--budget-ratios", dest="budget_ratios", help="candidate,winner,after-add (default 1,3,5)")
    p.add_argument("--limit-complexity", dest="limit_complexity", type=int)
    p.add_argument("--max-neurons-added", dest="max_neurons_added", type=int)
    p.add_argument("--target-error", dest="target_error", type=float)
    p.add_argument("--init-noise-sigma", dest="init_noise_sigma", type=float)
    p.add_argument("--quadrature-nodes", dest="quadrature_nodes", type=int)
    p.add_argument("--jobs", type=int, help="parallel candidate trainings")
    p.add_argument("--seed", type=int)
    p.add_argument("--activation", help="hidden-neuron activation (default softsquare)")
    p.add_argument("--config", help="JSON config or manifest to take defaults from")
    p.set_defaults(func=_cmd_grow)

    p = sub.add_parser("baseline", help="polynomial fits or standard-architecture sweeps")
    p.add_argument("dataset", nargs="?", help="training CSV")
    p.add_argument("--poly", help="comma-separated degrees, e.g. 1,2,3")
    p.add_argument("--sweep", help="three-layer:H1RANGE,H2RANGE or max-full:RANGE (range: A-B[:STEP])")
    p.add_argument("--repeats", type=int, help="fresh restarts per architecture (default 10)")
    p.add_argument("--delta-steps", dest="delta_steps", type=int)
    p.add_argument("--budget-multiplier", dest="budget_multiplier", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--optimizer", choices=["adam", "sgd_momentum"])
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--activation")
    p.add_argument("--out", help="output CSV path")
    p.add_argument("--config", help="JSON config or manifest to take defaults from")
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("compare", help="optimized frontier vs standard envelope")
    p.add_argument("--standard", required=True, help="CSV with complexity,error columns")
    p.add_argument("--optimized", required=True, help="frontier CSV from grow")
    p.add_argument("--out", required=True, help="report CSV path")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("export-dot", help="render a network file as DOT text")
    p.add_argument("network", help="network JSON file")
    p.add_argument("--hide-inputs", action="store_true", help="omit input nodes and their edges")
    p.add_argument("--precision", type=int, default=3, help="edge label digits")
    p.add_argument("--out", help="write DOT here instead of stdout")
    p.set_defaults(func=_cmd_export_dot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputError, PgmError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
