"""Command-line front end: one subcommand per pipeline stage.

generate   build a synthetic point cloud file (plus optional labels file)
obfuscate  turn a points file into an obfuscation file and a sidecar file
neighbors  derive oracle neighborhoods from the sidecar, optionally corrupted
recover    run the attack on an obfuscation file plus a neighborhoods file
evaluate   score a recovered file against its sidecar and write a report
pipeline   chain every stage over scheme x inlier-ratio and emit a sweep table

Every subcommand accepts --config FILE holding either JSON or key=value
lines. Flags given on the command line win over config values; keys the
subcommand does not define are rejected. Usage problems (bad flags, unknown
config keys, missing input files) exit with code 2; runtime failures (bad
data, compute errors) exit with code 1.

Stages communicate only through files, so a pipeline run exercises the same
serialization boundaries as separate invocations. Seeds follow the evaluation
module's offsets (obfuscate +101, corrupt +202, recover +303), which makes a
pipeline cell byte-reproducible against a library sweep of the same cell.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from pointveil.evaluate import (
    _CORRUPT_SEED_OFFSET,
    _OBFUSCATE_SEED_OFFSET,
    _RECOVER_SEED_OFFSET,
    default_thresholds,
    geometric_accuracy,
    sweep_csv,
    sweep_json,
)
from pointveil.fileio import (
    read_neighborhoods,
    read_obfuscation,
    read_points,
    read_recovered,
    read_sidecar,
    write_neighborhoods,
    write_obfuscation,
    write_points,
    write_recovered,
    write_report,
    write_sidecar,
)
from pointveil.neighborhoods import corrupt_neighborhoods, oracle_neighborhoods
from pointveil.obfuscate import SCHEMES, obfuscate
from pointveil.recover import RecoveryConfig, recover_cloud
from pointveil.synthetic import SCENE_KINDS, generate_synthetic


class UsageError(Exception):
    """Bad invocation (missing inputs, bad config); exits with code 2."""


# ----------------------------------------------------------- value parsing


def _parse_bool(value):
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _parse_float_list(value):
    if isinstance(value, (list, tuple)):
        return tuple(float(v) for v in value)
    return tuple(float(part) for part in str(value).split(",") if part.strip())


def _parse_scheme_list(value):
    if isinstance(value, (list, tuple)):
        names = [str(v) for v in value]
    else:
        names = [part.strip() for part in str(value).split(",") if part.strip()]
    for name in names:
        if name not in SCHEMES:
            raise ValueError(f"unknown scheme {name!r}; choose from {', '.join(SCHEMES)}")
    if not names:
        raise ValueError("at least one scheme is required")
    return tuple(names)


def _parse_thresholds(value):
    if value is None or value == "default":
        return None
    return _parse_float_list(value)


_COERCERS = {
    "int": int,
    "float": float,
    "str": str,
    "bool": _parse_bool,
    "floats": _parse_float_list,
    "schemes": _parse_scheme_list,
    "thresholds": _parse_thresholds,
    "path": str,
}


# ----------------------------------------------------------- option tables

# (flag, dest, kind, default, help). Defaults apply after config merging, so
# a None default plus a required marker means "must come from flag or config".
_GENERATE_OPTS = [
    ("--kind", "kind", "str", "uniform_box", "scene kind: " + ", ".join(SCENE_KINDS)),
    ("--n", "n", "int", None, "number of points (required)"),
    ("--m", "m", "int", 3, "dimension, 2 or 3"),
    ("--seed", "seed", "int", 0, "RNG seed"),
    ("--descriptors", "descriptors", "str", "none", "none, random, or clustered"),
    ("--descriptor-dim", "descriptor_dim", "int", 8, "descriptor length"),
    ("--descriptor-clusters", "descriptor_clusters", "int", 8, "clusters for clustered mode"),
    ("--descriptor-noise", "descriptor_noise", "float", 0.15, "noise for clustered mode"),
    ("--out", "out", "path", None, "points file to write (required)"),
    ("--labels-out", "labels_out", "path", None, "optional labels JSON to write"),
]

_OBFUSCATE_OPTS = [
    ("--points", "points", "path", None, "input points file (required)"),
    ("--scheme", "scheme", "str", None, "obfuscation scheme (required)"),
    ("--seed", "seed", "int", 0, "RNG seed"),
    ("--center-assignment", "center_assignment", "str", None, "Ray only: random, opposite, same"),
    ("--out", "out", "path", None, "obfuscation file to write (required)"),
    ("--sidecar", "sidecar", "path", None, "ground-truth sidecar file to write (required)"),
    ("--labels", "labels", "path", None, "optional labels JSON to fold into the sidecar"),
]

_NEIGHBORS_OPTS = [
    ("--obf", "obf", "path", None, "obfuscation file (required)"),
    ("--sidecar", "sidecar", "path", None, "sidecar file with the original points (required)"),
    ("--k", "k", "int", None, "neighborhood size (default 50 in 3D, 20 in 2D)"),
    ("--inlier-ratio", "inlier_ratio", "float", 1.0, "fraction of true members kept"),
    ("--seed", "seed", "int", 0, "corruption RNG seed"),
    ("--out", "out", "path", None, "neighborhoods file to write (required)"),
]

_RECOVER_OPTS = [
    ("--obf", "obf", "path", None, "obfuscation file (required)"),
    ("--neighbors", "neighbors", "path", None, "neighborhoods file (required)"),
    ("--seed", "seed", "int", 0, "RANSAC RNG seed"),
    ("--delta", "delta", "float", None, "inlier distance threshold (default 2% of scene scale)"),
    ("--threads", "threads", "int", 1, "worker processes"),
    ("--max-iters", "max_iters", "int", 10_000, "RANSAC iteration cap"),
    ("--sample-size", "sample_size", "int", None, "RANSAC sample size (default 3 in 3D, 2 in 2D)"),
    ("--confidence", "confidence", "float", 0.99, "RANSAC stopping confidence"),
    ("--assumed-inlier-ratio", "assumed_inlier_ratio", "float", None, "fix the adaptive-bound ratio"),
    ("--exhaustive", "exhaustive", "bool", False, "enumerate every hypothesis subset"),
    ("--out", "out", "path", None, "recovered file to write (required)"),
]

_EVALUATE_OPTS = [
    ("--recovered", "recovered", "path", None, "recovered file (required)"),
    ("--sidecar", "sidecar", "path", None, "sidecar file with ground truth (required)"),
    ("--thresholds", "thresholds", "thresholds", None, "comma floats, or 'default'"),
    ("--report", "report", "path", None, "report file to write (required)"),
]

_PIPELINE_OPTS = [
    ("--kind", "kind", "str", "uniform_box", "scene kind"),
    ("--n", "n", "int", None, "number of points (required)"),
    ("--m", "m", "int", 3, "dimension, 2 or 3"),
    ("--seed", "seed", "int", 0, "base seed for the whole chain"),
    ("--descriptors", "descriptors", "str", "none", "none, random, or clustered"),
    ("--scheme", "scheme", "schemes", None, "comma-separated schemes (required)"),
    ("--k", "k", "int", None, "neighborhood size (default 50 in 3D, 20 in 2D)"),
    ("--inlier-ratio", "inlier_ratio", "floats", (1.0,), "comma-separated inlier ratios"),
    ("--delta", "delta", "float", None, "inlier distance threshold (default 2% of scene scale)"),
    ("--threads", "threads", "int", 1, "worker processes"),
    ("--thresholds", "thresholds", "thresholds", None, "comma floats, or 'default'"),
    ("--max-iters", "max_iters", "int", 10_000, "RANSAC iteration cap"),
    ("--sample-size", "sample_size", "int", None, "RANSAC sample size"),
    ("--confidence", "confidence", "float", 0.99, "RANSAC stopping confidence"),
    ("--assumed-inlier-ratio", "assumed_inlier_ratio", "float", None, "fix the adaptive-bound ratio"),
    ("--exhaustive", "exhaustive", "bool", False, "enumerate every hypothesis subset"),
    ("--out-dir", "out_dir", "path", None, "directory for all artifacts (required)"),
]

_REQUIRED = {
    "generate": ("n", "out"),
    "obfuscate": ("points", "scheme", "out", "sidecar"),
    "neighbors": ("obf", "sidecar", "out"),
    "recover": ("obf", "neighbors", "out"),
    "evaluate": ("recovered", "sidecar", "report"),
    "pipeline": ("n", "scheme", "out_dir"),
}

_OPTS = {
    "generate": _GENERATE_OPTS,
    "obfuscate": _OBFUSCATE_OPTS,
    "neighbors": _NEIGHBORS_OPTS,
    "recover": _RECOVER_OPTS,
    "evaluate": _EVALUATE_OPTS,
    "pipeline": _PIPELINE_OPTS,
}


@dataclass
class RunConfig:
    """Validated settings for a full pipeline run (one value per CLI flag)."""

    n: int
    schemes: tuple
    out_dir: str
    kind: str = "uniform_box"
    m: int = 3
    seed: int = 0
    descriptors: str = "none"
    k: int | None = None
    inlier_ratios: tuple = (1.0,)
    delta: float | None = None
    threads: int = 1
    thresholds: tuple | None = None
    max_iters: int = 10_000
    sample_size: int | None = None
    confidence: float = 0.99
    assumed_inlier_ratio: float | None = None
    exhaustive: bool = False

    def __post_init__(self):
        if self.kind not in SCENE_KINDS:
            raise UsageError(f"unknown scene kind {self.kind!r}")
        if self.m not in (2, 3):
            raise UsageError("m must be 2 or 3")
        if self.n < 1:
            raise UsageError("n must be >= 1")
        self.schemes = _parse_scheme_list(self.schemes)
        self.inlier_ratios = tuple(float(r) for r in self.inlier_ratios)
        for ratio in self.inlier_ratios:
            if not 0.0 < ratio <= 1.0:
                raise UsageError(f"inlier ratio {ratio} outside (0, 1]")
        if self.thresholds is not None:
            self.thresholds = tuple(float(t) for t in self.thresholds)
        if self.threads < 1:
            raise UsageError("threads must be >= 1")

    def recovery_config(self, seed: int) -> RecoveryConfig:
        return RecoveryConfig(
            seed=seed,
            ransac_max_iters=self.max_iters,
            ransac_sample_size=self.sample_size,
            inlier_threshold=self.delta,
            assumed_inlier_ratio=self.assumed_inlier_ratio,
            confidence=self.confidence,
            exhaustive=self.exhaustive,
            threads=self.threads,
        )


# ----------------------------------------------------------- config files


def _load_config_file(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config JSON must be an object")
        return data
    data = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise UsageError(f"config line {lineno} is not key=value: {stripped!r}")
        key, value = stripped.split("=", 1)
        data[key.strip()] = value.strip()
    return data


def _merge_config(command: str, args: argparse.Namespace) -> None:
    """Fill unset flags from the config file; reject keys the command lacks."""
    opts = {dest: kind for _, dest, kind, _, _ in _OPTS[command]}
    if args.config is not None:
        data = _load_config_file(args.config)
        for key, value in data.items():
            if key not in opts:
                raise UsageError(f"unknown config key {key!r} for {command}")
            if getattr(args, key) is None and value is not None:
                try:
                    setattr(args, key, _COERCERS[opts[key]](value))
                except (ValueError, TypeError) as exc:
                    raise UsageError(f"bad config value for {key!r}: {exc}") from None
    for _, dest, _, default, _ in _OPTS[command]:
        if getattr(args, dest) is None and default is not None:
            setattr(args, dest, default)
    for dest in _REQUIRED[command]:
        if getattr(args, dest) is None:
            flag = "--" + dest.replace("_", "-")
            raise UsageError(f"{flag} is required (flag or config)")


def _require_file(path: str, role: str) -> str:
    if not Path(path).is_file():
        raise UsageError(f"{role} file not found: {path}")
    return path


# ----------------------------------------------------------- stage commands


def _cmd_generate(args) -> int:
    if args.kind not in SCENE_KINDS:
        raise UsageError(f"unknown scene kind {args.kind!r}; choose from {', '.join(SCENE_KINDS)}")
    if args.m not in (2, 3):
        raise UsageError("m must be 2 or 3")
    if args.n < 1:
        raise UsageError("n must be >= 1")
    if args.descriptors not in ("none", "random", "clustered"):
        raise UsageError(f"unknown descriptor mode {args.descriptors!r}")
    cloud, labels = generate_synthetic(
        args.kind,
        args.n,
        args.m,
        seed=args.seed,
        descriptors=args.descriptors,
        descriptor_dim=args.descriptor_dim,
        descriptor_clusters=args.descriptor_clusters,
        descriptor_noise=args.descriptor_noise,
    )
    write_points(cloud, args.out)
    if args.labels_out:
        Path(args.labels_out).write_text(
            json.dumps(labels, sort_keys=True, separators=(",", ":")) + "\n"
        )
    print(f"wrote {len(cloud)} points ({args.kind}, {args.m}d) to {args.out}")
    return 0


def _cmd_obfuscate(args) -> int:
    if args.scheme not in SCHEMES:
        raise UsageError(f"unknown scheme {args.scheme!r}; choose from {', '.join(SCHEMES)}")
    cloud = read_points(_require_file(args.points, "points"))
    params = {}
    if args.center_assignment is not None:
        if args.scheme != "Ray":
            raise UsageError("--center-assignment applies to the Ray scheme only")
        params["center_assignment"] = args.center_assignment
    obf, sidecar = obfuscate(cloud, args.scheme, args.seed, **params)
    if args.labels:
        sidecar.labels.update(json.loads(Path(_require_file(args.labels, "labels")).read_text()))
    write_obfuscation(obf, args.out)
    write_sidecar(sidecar, args.sidecar)
    print(f"obfuscated {len(obf)} items with {args.scheme} to {args.out}")
    return 0


def _cmd_neighbors(args) -> int:
    obf = read_obfuscation(_require_file(args.obf, "obfuscation"))
    sidecar = read_sidecar(_require_file(args.sidecar, "sidecar"))
    k = args.k if args.k is not None else RecoveryConfig().default_k_for(obf.dimension)
    nbrs = oracle_neighborhoods(sidecar.cloud, obf, k, sidecar=sidecar)
    if args.inlier_ratio < 1.0:
        nbrs = corrupt_neighborhoods(nbrs, args.inlier_ratio, args.seed, all_item_ids=obf.ids)
    write_neighborhoods(nbrs, args.out)
    print(f"wrote {len(nbrs)} neighborhoods (k={k}, In={args.inlier_ratio}) to {args.out}")
    return 0


def _cmd_recover(args) -> int:
    obf = read_obfuscation(_require_file(args.obf, "obfuscation"))
    nbrs = read_neighborhoods(_require_file(args.neighbors, "neighborhoods"))
    cfg = RecoveryConfig(
        seed=args.seed,
        ransac_max_iters=args.max_iters,
        ransac_sample_size=args.sample_size,
        inlier_threshold=args.delta,
        assumed_inlier_ratio=args.assumed_inlier_ratio,
        confidence=args.confidence,
        exhaustive=args.exhaustive or False,
        threads=args.threads,
    )
    rec = recover_cloud(obf, nbrs, cfg)
    write_recovered(rec, args.out)
    print(
        f"recovered {len(rec)} subjects ({int(rec.degenerate.sum())} degenerate) to {args.out}"
    )
    return 0


def _cmd_evaluate(args) -> int:
    rec = read_recovered(_require_file(args.recovered, "recovered"))
    sidecar = read_sidecar(_require_file(args.sidecar, "sidecar"))
    report = geometric_accuracy(rec, sidecar.cloud, thresholds=args.thresholds, sidecar=sidecar)
    write_report(report.to_dict(), args.report)
    pairs = ", ".join(
        f"{f:.3f} within {t:g}" for t, f in zip(report.thresholds, report.fraction_within)
    )
    print(f"{rec.scheme}: {pairs}; median error {report.median_error:.4g}")
    return 0


def _cmd_pipeline(args) -> int:
    run = RunConfig(
        n=args.n,
        schemes=args.scheme,
        out_dir=args.out_dir,
        kind=args.kind,
        m=args.m,
        seed=args.seed,
        descriptors=args.descriptors,
        k=args.k,
        inlier_ratios=args.inlier_ratio,
        delta=args.delta,
        threads=args.threads,
        thresholds=args.thresholds,
        max_iters=args.max_iters,
        sample_size=args.sample_size,
        confidence=args.confidence,
        assumed_inlier_ratio=args.assumed_inlier_ratio,
        exhaustive=args.exhaustive or False,
    )
    out = Path(run.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    label = f"{run.kind}-{run.n}-{run.m}d"

    cloud, _ = generate_synthetic(
        run.kind, run.n, run.m, seed=run.seed, descriptors=run.descriptors
    )
    points_path = out / "points.txt"
    write_points(cloud, points_path)

    rows, failures = [], []
    k = run.k if run.k is not None else RecoveryConfig().default_k_for(run.m)
    thresholds = (
        run.thresholds if run.thresholds is not None else default_thresholds(run.m)
    )
    for scheme in run.schemes:
        try:
            obf, sidecar = obfuscate(
                read_points(points_path), scheme, run.seed + _OBFUSCATE_SEED_OFFSET
            )
            obf_path = out / f"{scheme}.obf.txt"
            write_obfuscation(obf, obf_path)
            write_sidecar(sidecar, out / f"{scheme}.sidecar.txt")

            sidecar = read_sidecar(out / f"{scheme}.sidecar.txt")
            obf = read_obfuscation(obf_path)
            oracle = oracle_neighborhoods(sidecar.cloud, obf, k, sidecar=sidecar)
        except Exception as exc:
            for ratio in run.inlier_ratios:
                failures.append(
                    {"scene": label, "scheme": scheme, "In": float(ratio),
                     "seed": run.seed, "error": str(exc)}
                )
            continue
        for ratio in run.inlier_ratios:
            tag = f"{scheme}.in{ratio:g}"
            try:
                nbrs = oracle
                if ratio < 1.0:
                    nbrs = corrupt_neighborhoods(
                        oracle, ratio, run.seed + _CORRUPT_SEED_OFFSET, all_item_ids=obf.ids
                    )
                write_neighborhoods(nbrs, out / f"{tag}.nbrs.txt")

                nbrs = read_neighborhoods(out / f"{tag}.nbrs.txt")
                rec = recover_cloud(
                    obf, nbrs, run.recovery_config(run.seed + _RECOVER_SEED_OFFSET)
                )
                write_recovered(rec, out / f"{tag}.rec.txt")

                rec = read_recovered(out / f"{tag}.rec.txt")
                report = geometric_accuracy(
                    rec, sidecar.cloud, thresholds=thresholds, sidecar=sidecar
                )
                write_report(report.to_dict(), out / f"{tag}.report.txt")
            except Exception as exc:
                failures.append(
                    {"scene": label, "scheme": scheme, "In": float(ratio),
                     "seed": run.seed, "error": str(exc)}
                )
                continue
            for t, f in zip(report.thresholds, report.fraction_within):
                rows.append(
                    {"scene": label, "scheme": scheme, "In": float(ratio), "K": k,
                     "seed": run.seed, "threshold": float(t), "fraction": float(f)}
                )

    rows.sort(key=lambda r: (r["scene"], r["scheme"], r["In"], r["seed"], r["threshold"]))
    aggregated = [
        {**row, "seed": "mean"}
        for row in sorted(rows, key=lambda r: (r["scene"], r["scheme"], r["In"], r["K"], r["threshold"]))
    ]
    table = {"rows": rows, "aggregated": aggregated, "failures": failures}
    csv_text = sweep_csv(table)
    (out / "sweep.csv").write_text(csv_text)
    (out / "sweep.json").write_text(sweep_json(table))
    print(csv_text, end="")
    if failures:
        print(f"{len(failures)} cell(s) failed; see sweep.json", file=sys.stderr)
    return 0


# ----------------------------------------------------------- parser wiring


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pointveil",
        description="Point-cloud obfuscation schemes and the neighborhood recovery attack.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    handlers = {
        "generate": _cmd_generate,
        "obfuscate": _cmd_obfuscate,
        "neighbors": _cmd_neighbors,
        "recover": _cmd_recover,
        "evaluate": _cmd_evaluate,
        "pipeline": _cmd_pipeline,
    }
    for command, opts in _OPTS.items():
        p = sub.add_parser(command)
        p.add_argument("--config", default=None, help="JSON or key=value settings file")
        for flag, dest, kind, _, help_text in opts:
            if kind == "bool":
                p.add_argument(flag, dest=dest, action="store_const", const=True,
                               default=None, help=help_text)
            else:
                p.add_argument(flag, dest=dest, type=_COERCERS[kind],
                               default=None, help=help_text)
        p.set_defaults(handler=handlers[command])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _merge_config(args.command, args)
        return args.handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
