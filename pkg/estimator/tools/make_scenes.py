"""Build estimator training/evaluation scenes by driving the pointveil CLI.

Each scene directory receives points.txt (clustered descriptors), obf.txt +
side.txt (line obfuscation, item ids equal point ids), and oracle.txt (exact
spatial K-NN supervision). Everything goes through the CLI argv interface so
the estimator depends only on the published file formats.

Usage: python3 make_scenes.py OUT_DIR COUNT START_SEED N K [DIM CLUSTERS NOISE]
"""

import sys
from pathlib import Path

from pointveil.cli import main


def build_scene(scene_dir, seed, n, k, dim, clusters, noise):
    scene_dir.mkdir(parents=True, exist_ok=True)
    points = str(scene_dir / "points.txt")
    obf = str(scene_dir / "obf.txt")
    side = str(scene_dir / "side.txt")
    oracle = str(scene_dir / "oracle.txt")
    steps = [
        ["generate", "--kind", "uniform_box", "--n", str(n), "--m", "3",
         "--seed", str(seed), "--descriptors", "clustered",
         "--descriptor-dim", str(dim), "--descriptor-clusters", str(clusters),
         "--descriptor-noise", str(noise), "--out", points],
        ["obfuscate", "--points", points, "--scheme", "Line3D_OLC",
         "--seed", str(seed), "--out", obf, "--sidecar", side],
        ["neighbors", "--obf", obf, "--sidecar", side, "--k", str(k),
         "--seed", str(seed), "--out", oracle],
    ]
    for argv in steps:
        rc = main(argv)
        if rc != 0:
            raise SystemExit(f"pointveil {argv[0]} failed with rc={rc} for {scene_dir}")


def run(out_dir, count, start_seed, n, k, dim=8, clusters=10, noise=0.15):
    root = Path(out_dir)
    for i in range(count):
        build_scene(root / f"scene_{i:03d}", start_seed + i, n, k, dim, clusters, noise)
    print(f"built {count} scenes under {root}")


if __name__ == "__main__":
    args = sys.argv[1:]
    if len(args) < 5:
        raise SystemExit(__doc__)
    dim = int(args[5]) if len(args) > 5 else 8
    clusters = int(args[6]) if len(args) > 6 else 10
    noise = float(args[7]) if len(args) > 7 else 0.15
    run(args[0], int(args[1]), int(args[2]), int(args[3]), int(args[4]), dim, clusters, noise)
