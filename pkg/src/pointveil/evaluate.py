"""Scoring of recovered clouds: thresholded accuracy and scheme/ratio sweeps.

geometric_accuracy compares a RecoveredCloud to the original points (sidecar
links resolve which point each subject hides) and reports the fraction of
subjects recovered within each distance threshold. Degenerate recoveries are
scored as failures at every threshold rather than dropped, so accuracy never
benefits from giving up.

sweep runs the full generate/obfuscate/corrupt/recover/score loop over a grid
of scenes, schemes, inlier ratios, and seeds, recording per-cell failures
without aborting, and aggregates seed means for table emission.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from pointveil.geometry import GeometryError, PointCloud, scene_diameter
from pointveil.neighborhoods import corrupt_neighborhoods, oracle_neighborhoods
from pointveil.obfuscate import obfuscate
from pointveil.recover import RecoveredCloud, RecoveryConfig, recover_cloud
from pointveil.synthetic import generate_synthetic

THRESHOLDS_2D = (5.0, 10.0, 25.0)          # pixels
THRESHOLDS_3D_INDOOR = (0.10, 0.25)        # meters
THRESHOLDS_3D_OUTDOOR = (0.25, 0.50)       # meters

CSV_COLUMNS = ("scene", "scheme", "In", "K", "seed", "threshold", "fraction")

# fixed offsets keep each stage of a sweep cell on its own RNG stream
_OBFUSCATE_SEED_OFFSET = 101
_CORRUPT_SEED_OFFSET = 202
_RECOVER_SEED_OFFSET = 303


def default_thresholds(dimension: int, setting: str = "indoor"):
    """Distance thresholds in scene units (px for 2D, m for 3D)."""
    if dimension == 2:
        return THRESHOLDS_2D
    if setting == "indoor":
        return THRESHOLDS_3D_INDOOR
    if setting == "outdoor":
        return THRESHOLDS_3D_OUTDOOR
    raise GeometryError(f"unknown threshold setting {setting!r}")


@dataclass
class AccuracyReport:
    """Thresholded accuracy plus the raw per-subject errors behind it.

    per_point_errors is infinite for degenerate subjects; mean_error and
    median_error summarize the finite entries only (failure counts live in
    metadata and in the fractions themselves).
    """

    thresholds: tuple
    fraction_within: tuple
    per_point_errors: np.ndarray
    mean_error: float
    median_error: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.thresholds = tuple(float(t) for t in self.thresholds)
        self.fraction_within = tuple(float(f) for f in self.fraction_within)
        self.per_point_errors = np.asarray(self.per_point_errors, dtype=np.float64)
        if any(t2 <= t1 for t1, t2 in zip(self.thresholds, self.thresholds[1:])):
            raise GeometryError("thresholds must be strictly increasing")
        if len(self.thresholds) != len(self.fraction_within):
            raise GeometryError("one fraction per threshold required")
        for f in self.fraction_within:
            if not 0.0 <= f <= 1.0:
                raise GeometryError(f"fraction {f} outside [0, 1]")
        if any(f2 < f1 for f1, f2 in zip(self.fraction_within, self.fraction_within[1:])):
            raise GeometryError("fractions must be non-decreasing in the threshold")

    def to_dict(self):
        errors = [None if not np.isfinite(e) else float(e) for e in self.per_point_errors]
        return {
            "thresholds": list(self.thresholds),
            "fraction_within": list(self.fraction_within),
            "per_point_errors": errors,
            "mean_error": self.mean_error,
            "median_error": self.median_error,
            "metadata": self.metadata,
        }


def _truth_coords(recovered: RecoveredCloud, truth: PointCloud, sidecar):
    """Original coordinates per subject row, resolved through sidecar links."""
    needs_links = recovered.scheme in ("PPL", "PPLplus")
    if needs_links and sidecar is None:
        raise GeometryError(f"{recovered.scheme} scoring requires the ground-truth sidecar")
    row_by_id = {int(i): r for r, i in enumerate(truth.ids)}
    out = np.empty((len(recovered), truth.dimension))
    for r, (item, slot) in enumerate(recovered.subjects):
        item, slot = int(item), int(slot)
        if sidecar is not None:
            sources = sidecar.links.get(item)
            if sources is None or slot >= len(sources):
                raise GeometryError(f"no ground-truth link for subject ({item}, {slot})")
            source = int(sources[slot])
        else:
            source = item
        if source not in row_by_id:
            raise GeometryError(f"subject ({item}, {slot}) maps to unknown point {source}")
        out[r] = truth.coords[row_by_id[source]]
    return out


def geometric_accuracy(
    recovered: RecoveredCloud,
    truth: PointCloud,
    thresholds=None,
    sidecar=None,
) -> AccuracyReport:
    """Fraction of subjects recovered within each threshold (degenerate = fail)."""
    if thresholds is None:
        thresholds = default_thresholds(truth.dimension)
    thresholds = tuple(float(t) for t in thresholds)
    target = _truth_coords(recovered, truth, sidecar)
    errors = np.linalg.norm(recovered.coords - target, axis=1)
    errors[recovered.degenerate] = np.inf
    fractions = tuple(float(np.mean(errors <= t)) for t in thresholds)
    finite = errors[np.isfinite(errors)]
    return AccuracyReport(
        thresholds=thresholds,
        fraction_within=fractions,
        per_point_errors=errors,
        mean_error=float(finite.mean()) if len(finite) else float("inf"),
        median_error=float(np.median(finite)) if len(finite) else float("inf"),
        metadata={
            "scheme": recovered.scheme,
            "inlier_ratio": recovered.metadata.get("inlier_ratio"),
            "k": recovered.metadata.get("k"),
            "seed": recovered.metadata.get("seed"),
            "subject_count": len(recovered),
            "degenerate_count": int(recovered.degenerate.sum()),
        },
    )


def _scene_spec(scene):
    """Normalize a scene spec to (label, kwargs for generate_synthetic)."""
    if isinstance(scene, dict):
        spec = dict(scene)
        kind = spec.pop("kind")
        n = spec.pop("n")
        m = spec.pop("m")
    else:
        kind, n, m = scene
        spec = {}
    label = f"{kind}-{n}-{m}d"
    return label, kind, int(n), int(m), spec


def run_cell(scene, scheme, inlier_ratio, seed, cfg=None, k=None, thresholds=None):
    """One sweep cell: generate, obfuscate, corrupt, recover, score.

    Deterministic in (scene, scheme, inlier_ratio, seed); sweep() calls this
    per cell, so any cell can be reproduced standalone.
    """
    label, kind, n, m, extra = _scene_spec(scene)
    cfg = cfg or RecoveryConfig()
    cloud, _ = generate_synthetic(kind, n, m, seed=seed, **extra)
    obf, sidecar = obfuscate(cloud, scheme, seed=seed + _OBFUSCATE_SEED_OFFSET)
    k_eff = int(k) if k is not None else cfg.default_k_for(m)
    nbrs = oracle_neighborhoods(cloud, obf, k_eff, sidecar)
    if inlier_ratio < 1.0:
        nbrs = corrupt_neighborhoods(
            nbrs, inlier_ratio, seed=seed + _CORRUPT_SEED_OFFSET, all_item_ids=obf.ids
        )
    run_cfg = RecoveryConfig(
        seed=seed + _RECOVER_SEED_OFFSET,
        ransac_max_iters=cfg.ransac_max_iters,
        ransac_sample_size=cfg.ransac_sample_size,
        inlier_threshold=cfg.inlier_threshold,
        assumed_inlier_ratio=cfg.assumed_inlier_ratio,
        confidence=cfg.confidence,
        k_neighbors=cfg.k_neighbors,
        exhaustive=cfg.exhaustive,
        refine_unsquared=cfg.refine_unsquared,
        threads=cfg.threads,
    )
    rec = recover_cloud(obf, nbrs, run_cfg)
    if thresholds is None:
        thresholds = default_thresholds(m)
    report = geometric_accuracy(rec, cloud, thresholds=thresholds, sidecar=sidecar)
    report.metadata.update(
        {"scene": label, "inlier_ratio": float(inlier_ratio), "seed": int(seed), "k": k_eff}
    )
    return report


def sweep(scenes, schemes, inlier_ratios, seeds, cfg=None, k=None, thresholds=None):
    """Cross-product evaluation; one AccuracyReport per (scene, scheme, In, seed).

    Returns {"rows": per-seed threshold rows, "aggregated": seed means,
    "reports": the reports themselves, "failures": cells that raised}. Row
    order is canonical (sorted), so reordering the seeds argument does not
    change the output.
    """
    rows, failures, reports = [], [], []
    for scene in scenes:
        label = _scene_spec(scene)[0]
        for scheme in schemes:
            for ratio in inlier_ratios:
                for seed in sorted(int(s) for s in seeds):
                    try:
                        report = run_cell(
                            scene, scheme, ratio, seed, cfg=cfg, k=k, thresholds=thresholds
                        )
                    except Exception as exc:  # cell failure: record and move on
                        failures.append(
                            {
                                "scene": label,
                                "scheme": scheme,
                                "In": float(ratio),
                                "seed": int(seed),
                                "error": str(exc),
                            }
                        )
                        continue
                    reports.append(report)
                    for t, f in zip(report.thresholds, report.fraction_within):
                        rows.append(
                            {
                                "scene": label,
                                "scheme": scheme,
                                "In": float(ratio),
                                "K": report.metadata["k"],
                                "seed": int(seed),
                                "threshold": float(t),
                                "fraction": float(f),
                            }
                        )

    grouped = {}
    for row in rows:
        key = (row["scene"], row["scheme"], row["In"], row["K"], row["threshold"])
        grouped.setdefault(key, []).append(row["fraction"])
    aggregated = [
        {
            "scene": scene,
            "scheme": scheme,
            "In": ratio,
            "K": k_eff,
            "seed": "mean",
            "threshold": threshold,
            "fraction": float(np.mean(fracs)),
        }
        for (scene, scheme, ratio, k_eff, threshold), fracs in sorted(grouped.items())
    ]
    rows.sort(key=lambda r: (r["scene"], r["scheme"], r["In"], r["seed"], r["threshold"]))
    return {"rows": rows, "aggregated": aggregated, "reports": reports, "failures": failures}


def sweep_csv(table) -> str:
    """CSV text of a sweep: per-seed rows, then seed means, fixed column order."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in table["rows"] + table["aggregated"]:
        writer.writerow({col: row[col] for col in CSV_COLUMNS})
    return buf.getvalue()


def sweep_json(table) -> str:
    """JSON text of a sweep (rows, aggregates, failures), stable key order."""
    payload = {
        "rows": table["rows"],
        "aggregated": table["aggregated"],
        "failures": table["failures"],
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"
