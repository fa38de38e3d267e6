"""
The five file formats
=====================

Every artifact is line-oriented text: a one-line JSON header, then one
record per line. Floats use shortest round-trip repr, so writing what you
read reproduces the file byte for byte.
"""

import tempfile
from pathlib import Path

from pointveil import (
    generate_synthetic,
    obfuscate,
    oracle_neighborhoods,
    read_obfuscation,
    write_neighborhoods,
    write_obfuscation,
    write_points,
    write_sidecar,
)

work = Path(tempfile.mkdtemp())
cloud, _ = generate_synthetic("gaussian_blobs", 60, 3, seed=3, descriptors="clustered")
obf, sidecar = obfuscate(cloud, "PPL", seed=4)
nbrs = oracle_neighborhoods(cloud, obf, 8, sidecar)

write_points(cloud, work / "points.txt")
write_obfuscation(obf, work / "obf.txt")
write_sidecar(sidecar, work / "sidecar.txt")
write_neighborhoods(nbrs, work / "nbrs.txt")

# Peek at the obfuscation file: header first, then id, base, direction and
# the two descriptor blocks per line. No original coordinates anywhere.
text = (work / "obf.txt").read_text().splitlines()
print("header:", text[0][:120], "...")
print("record:", text[1][:80], "...")

# Round trip and canonical bytes.
back = read_obfuscation(work / "obf.txt")
write_obfuscation(back, work / "again.txt")
same = (work / "obf.txt").read_bytes() == (work / "again.txt").read_bytes()
print("read-write-read is byte-identical:", same)

# The sidecar holds ground truth (original points, pair links, slot orders)
# and lives in its own file precisely so the attack stages never touch it.
print("sidecar links for the first line:", sidecar.links[int(obf.ids[0])])
