"""
A tour of the obfuscation schemes
=================================

Build one small indoor scene and push it through every scheme, printing
what each obfuscated item actually stores.
"""

import numpy as np

from pointveil import generate_synthetic, obfuscate, scene_diameter

# A desk-sized 3D scene; the same call with m=2 gives an image-plane scene.
cloud, labels = generate_synthetic("uniform_box", 500, 3, seed=42)
print(f"scene: {len(cloud)} points, diameter {scene_diameter(cloud.coords):.2f} m")

# Random line clouds replace each point with a line through it. The stored
# base point is slid to a random spot along the line, so the file carries no
# trace of the original point.
obf, sidecar = obfuscate(cloud, "Line3D_OLC", seed=1)
print(f"\nLine3D_OLC: {len(obf)} lines")
print("  first line base     ", np.round(obf.bases[0], 3))
print("  first line direction", np.round(obf.directions[0], 3))

# Paired-point lines run one line through TWO original points, halving the
# item count. Each line would carry both descriptors in randomized order.
obf, sidecar = obfuscate(cloud, "PPL", seed=1)
pair = sidecar.links[int(obf.ids[0])]
print(f"\nPPL: {len(obf)} lines from {len(cloud)} points")
print(f"  line {int(obf.ids[0])} joins source points {pair}")

# The PPL+ variant refuses to pair two points that sit on the same detected
# plane, which blocks plane-intersection shortcuts.
obf, _ = obfuscate(cloud, "PPLplus", seed=1)
print(f"\nPPLplus: {len(obf)} lines, coplanarity threshold "
      f"{obf.metadata['plane_inlier_threshold']:.3f} m")

# Ray clouds anchor every line at one of two cluster centers, so directions
# are far from uniform.
obf, _ = obfuscate(cloud, "Ray", seed=1)
centers = np.asarray(obf.metadata["centers"])
print(f"\nRay: centers at {np.round(centers[0], 2)} and {np.round(centers[1], 2)}")

# Plane lifting keeps just one coordinate per point: the offset of an
# axis-aligned plane through it.
obf, _ = obfuscate(cloud, "Plane", seed=1)
axis_counts = np.bincount(obf.axes, minlength=3)
print(f"\nPlane: items per axis {axis_counts.tolist()}")

# Coordinate permutation swaps one uniformly chosen axis value inside random
# pairs of points. Items look like points but one coordinate is foreign.
obf, sidecar = obfuscate(cloud, "CP", seed=1)
item = int(obf.ids[0])
source = sidecar.links[item][0]
row = int(np.where(cloud.ids == source)[0][0])
print(f"\nCP: item {item} vs its source point")
print("  obfuscated:", np.round(obf.coords[0], 3))
print("  original:  ", np.round(cloud.coords[row], 3))
print("  swapped axis:", sidecar.cp_axes[item])
