"""
Driving the command line
========================

The CLI exposes one subcommand per stage plus a pipeline runner. Stages
talk only through files, so any step can be swapped for another tool that
honors the formats. This script shells out exactly as a user would.
"""

import subprocess
import sys
import tempfile
from pathlib import Path

work = Path(tempfile.mkdtemp())


def run(*args):
    cmd = [sys.executable, "-m", "pointveil.cli", *args]
    print("$", " ".join(args))
    out = subprocess.run(cmd, capture_output=True, text=True)
    if out.returncode != 0:
        raise SystemExit(out.stderr)
    print(out.stdout, end="")


# Stage by stage. A config file could supply any of these flags; explicit
# flags win over config values.
run("generate", "--kind", "uniform_box", "--n", "300", "--m", "3",
    "--seed", "0", "--out", str(work / "points.txt"))
run("obfuscate", "--points", str(work / "points.txt"), "--scheme", "Ray",
    "--seed", "0", "--out", str(work / "obf.txt"), "--sidecar", str(work / "sc.txt"))
run("neighbors", "--obf", str(work / "obf.txt"), "--sidecar", str(work / "sc.txt"),
    "--k", "20", "--inlier-ratio", "0.5", "--seed", "0", "--out", str(work / "nbrs.txt"))
run("recover", "--obf", str(work / "obf.txt"), "--neighbors", str(work / "nbrs.txt"),
    "--seed", "0", "--threads", "1", "--out", str(work / "rec.txt"))
run("evaluate", "--recovered", str(work / "rec.txt"), "--sidecar", str(work / "sc.txt"),
    "--thresholds", "0.1,0.25", "--report", str(work / "report.txt"))

# The pipeline subcommand chains all of the above over a scheme/ratio grid
# and writes sweep.csv plus sweep.json next to the intermediate files.
run("pipeline", "--kind", "uniform_box", "--n", "200", "--m", "3", "--seed", "1",
    "--scheme", "Line3D_OLC,CP", "--k", "10", "--inlier-ratio", "1.0,0.5",
    "--threads", "1", "--out-dir", str(work / "run"))

print("\nartifacts:")
for p in sorted((work / "run").iterdir()):
    print(" ", p.name)
