"""Line-oriented text formats for every pipeline artifact.

Each file is a one-line JSON header (format, version, shape, units, metadata)
followed by one record per line. Floats are written with Python's shortest
round-trip repr, and headers serialize with sorted keys, so re-serializing a
parsed file reproduces it byte for byte (canonical form).

Record layouts
--------------
points        : id x y [z] [d1 .. dD]
obfuscation   : line  -> id bx by [bz] ux uy [uz] [descriptors...]
                ray   -> id bx by bz ux uy uz center_id [descriptors...]
                plane -> id axis offset [descriptors...]
                point -> id x y [z] [descriptors...]   (CP)
neighborhoods : item slot n1 .. nK
recovered     : item slot x y [z] inliers cost degenerate assigned_desc tie
report        : single canonical-JSON payload line
sidecar       : single JSON payload line (original points, links, slot and
                axis records, labels); written separately so attack stages
                never open it

Parse failures raise ParseError naming the byte offset; version mismatches
raise VersionError. Recovery wall time is deliberately excluded from files so
identical runs produce identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from pointveil.geometry import GeometryError, PointCloud
from pointveil.neighborhoods import NeighborhoodSet
from pointveil.obfuscate import ObfuscatedCloud, GroundTruthSidecar, SCHEME_KIND
from pointveil.recover import RecoveredCloud

FORMAT_VERSION = 1


class ParseError(ValueError):
    """Malformed file content; `offset` is the byte position of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte {offset})")
        self.offset = int(offset)


class VersionError(ParseError):
    """Header version is not the one this reader understands."""


def _np_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj)!r}")


def _dump_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), default=_np_default)


def _fmt(x) -> str:
    return repr(float(x))


def _units_for(dimension: int) -> str:
    return "m" if dimension == 3 else "px"


def _split_records(data: bytes, expected_format: str):
    """Header dict plus (byte offset, decoded line) for each record line."""
    newline = data.find(b"\n")
    if newline < 0:
        raise ParseError("missing header line", 0)
    try:
        header = json.loads(data[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise ParseError("header is not valid JSON", 0) from None
    if not isinstance(header, dict) or "format" not in header:
        raise ParseError("header lacks a format field", 0)
    if header["format"] != expected_format:
        raise ParseError(
            f"expected a {expected_format} file, found {header['format']!r}", 0
        )
    if header.get("version") != FORMAT_VERSION:
        raise VersionError(
            f"unsupported {expected_format} version {header.get('version')!r}", 0
        )

    records = []
    offset = newline + 1
    for raw in data[newline + 1 :].split(b"\n"):
        if raw:
            try:
                records.append((offset, raw.decode("utf-8")))
            except UnicodeDecodeError:
                raise ParseError("record is not valid UTF-8", offset) from None
        elif offset < len(data):
            raise ParseError("blank record line", offset)
        offset += len(raw) + 1

    declared = header.get("n")
    if declared is not None:
        if len(records) < declared:
            raise ParseError(
                f"truncated: {len(records)} of {declared} records", len(data)
            )
        if len(records) > declared:
            raise ParseError("data past the declared record count", records[declared][0])
    return header, records


def _tokens(line: str, offset: int, count: int):
    parts = line.split()
    if len(parts) != count:
        raise ParseError(f"expected {count} fields, found {len(parts)}", offset)
    return parts


def _parse_int(token: str, offset: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise ParseError(f"not an integer: {token!r}", offset) from None


def _parse_float(token: str, offset: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"not a number: {token!r}", offset) from None


def _write_text(path, header: dict, lines) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_dump_json(header) + "\n")
        for line in lines:
            fh.write(line + "\n")


# --------------------------------------------------------------- points


def write_points(cloud: PointCloud, path) -> None:
    dim = cloud.descriptor_dim
    header = {
        "format": "points",
        "version": FORMAT_VERSION,
        "m": cloud.dimension,
        "n": len(cloud.ids),
        "units": cloud.metadata.get("units", _units_for(cloud.dimension)),
        "descriptor_dim": dim,
        "metadata": cloud.metadata,
    }

    def lines():
        for row, pid in enumerate(cloud.ids):
            parts = [str(int(pid))] + [_fmt(v) for v in cloud.coords[row]]
            if dim:
                parts += [_fmt(v) for v in cloud.descriptors[row]]
            yield " ".join(parts)

    _write_text(path, header, lines())


def read_points(path) -> PointCloud:
    header, records = _split_records(Path(path).read_bytes(), "points")
    m = int(header["m"])
    dim = int(header.get("descriptor_dim", 0))
    ids = np.empty(len(records), dtype=np.int64)
    coords = np.empty((len(records), m))
    desc = np.empty((len(records), dim)) if dim else None
    for row, (offset, line) in enumerate(records):
        parts = _tokens(line, offset, 1 + m + dim)
        ids[row] = _parse_int(parts[0], offset)
        coords[row] = [_parse_float(p, offset) for p in parts[1 : 1 + m]]
        if dim:
            desc[row] = [_parse_float(p, offset) for p in parts[1 + m :]]
    return PointCloud(
        dimension=m,
        ids=ids,
        coords=coords,
        descriptors=desc,
        metadata=header.get("metadata", {}),
    )


# --------------------------------------------------------------- obfuscation


def write_obfuscation(obf: ObfuscatedCloud, path) -> None:
    kind = obf.kind
    per_item = obf.descriptors_per_item
    dim = 0 if per_item == 0 else obf.descriptors.shape[2]
    header = {
        "format": "obfuscation",
        "version": FORMAT_VERSION,
        "scheme": obf.scheme,
        "m": obf.dimension,
        "n": len(obf),
        "units": obf.metadata.get("units", _units_for(obf.dimension)),
        "descriptors_per_item": per_item,
        "descriptor_dim": dim,
        "metadata": obf.metadata,
    }

    def lines():
        for row, item in enumerate(obf.ids):
            parts = [str(int(item))]
            if kind in ("line", "ray"):
                parts += [_fmt(v) for v in obf.bases[row]]
                parts += [_fmt(v) for v in obf.directions[row]]
                if kind == "ray":
                    parts.append(str(int(obf.center_ids[row])))
            elif kind == "plane":
                parts.append(str(int(obf.axes[row])))
                parts.append(_fmt(obf.offsets[row]))
            else:
                parts += [_fmt(v) for v in obf.coords[row]]
            if per_item:
                parts += [_fmt(v) for v in obf.descriptors[row].ravel()]
            yield " ".join(parts)

    _write_text(path, header, lines())


def read_obfuscation(path) -> ObfuscatedCloud:
    header, records = _split_records(Path(path).read_bytes(), "obfuscation")
    scheme = header.get("scheme")
    if scheme not in SCHEME_KIND:
        raise ParseError(f"unknown scheme {scheme!r}", 0)
    kind = SCHEME_KIND[scheme]
    m = int(header["m"])
    per_item = int(header.get("descriptors_per_item", 0))
    dim = int(header.get("descriptor_dim", 0))
    n = len(records)

    geometry_fields = {"line": 2 * m, "ray": 2 * m + 1, "plane": 2, "point": m}[kind]
    width = 1 + geometry_fields + per_item * dim

    ids = np.empty(n, dtype=np.int64)
    bases = np.empty((n, m)) if kind in ("line", "ray") else None
    dirs = np.empty((n, m)) if kind in ("line", "ray") else None
    center_ids = np.empty(n, dtype=np.int64) if kind == "ray" else None
    axes = np.empty(n, dtype=np.int64) if kind == "plane" else None
    offsets = np.empty(n) if kind == "plane" else None
    coords = np.empty((n, m)) if kind == "point" else None
    desc = np.empty((n, per_item, dim)) if per_item else None

    for row, (offset, line) in enumerate(records):
        parts = _tokens(line, offset, width)
        ids[row] = _parse_int(parts[0], offset)
        cursor = 1
        if kind in ("line", "ray"):
            bases[row] = [_parse_float(p, offset) for p in parts[cursor : cursor + m]]
            cursor += m
            dirs[row] = [_parse_float(p, offset) for p in parts[cursor : cursor + m]]
            cursor += m
            if kind == "ray":
                center_ids[row] = _parse_int(parts[cursor], offset)
                cursor += 1
        elif kind == "plane":
            axes[row] = _parse_int(parts[cursor], offset)
            offsets[row] = _parse_float(parts[cursor + 1], offset)
            cursor += 2
        else:
            coords[row] = [_parse_float(p, offset) for p in parts[cursor : cursor + m]]
            cursor += m
        if per_item:
            flat = [_parse_float(p, offset) for p in parts[cursor:]]
            desc[row] = np.asarray(flat).reshape(per_item, dim)

    return ObfuscatedCloud(
        scheme=scheme,
        dimension=m,
        ids=ids,
        metadata=header.get("metadata", {}),
        bases=bases,
        directions=dirs,
        center_ids=center_ids,
        axes=axes,
        offsets=offsets,
        coords=coords,
        descriptors=desc,
    )


# --------------------------------------------------------------- neighborhoods


def write_neighborhoods(nbrs: NeighborhoodSet, path) -> None:
    header = {
        "format": "neighborhoods",
        "version": FORMAT_VERSION,
        "k": nbrs.k,
        "n": len(nbrs),
        "provenance": nbrs.provenance,
        "metadata": nbrs.metadata,
    }

    def lines():
        for row in range(len(nbrs)):
            item, slot = nbrs.subjects[row]
            ids = " ".join(str(int(i)) for i in nbrs.neighbor_ids[row])
            yield f"{int(item)} {int(slot)} {ids}"

    _write_text(path, header, lines())


def read_neighborhoods(path) -> NeighborhoodSet:
    header, records = _split_records(Path(path).read_bytes(), "neighborhoods")
    k = int(header["k"])
    subjects = np.empty((len(records), 2), dtype=np.int64)
    neighbor_ids = np.empty((len(records), k), dtype=np.int64)
    for row, (offset, line) in enumerate(records):
        parts = _tokens(line, offset, 2 + k)
        subjects[row] = (_parse_int(parts[0], offset), _parse_int(parts[1], offset))
        neighbor_ids[row] = [_parse_int(p, offset) for p in parts[2:]]
    return NeighborhoodSet(
        k=k,
        subjects=subjects,
        neighbor_ids=neighbor_ids,
        provenance=header["provenance"],
        metadata=header.get("metadata", {}),
    )


# --------------------------------------------------------------- recovered


def write_recovered(rec: RecoveredCloud, path) -> None:
    metadata = {key: v for key, v in rec.metadata.items() if key != "wall_time_s"}
    header = {
        "format": "recovered",
        "version": FORMAT_VERSION,
        "scheme": rec.scheme,
        "m": rec.dimension,
        "n": len(rec),
        "metadata": metadata,
    }

    def lines():
        for row in range(len(rec)):
            item, slot = rec.subjects[row]
            parts = [str(int(item)), str(int(slot))]
            parts += [_fmt(v) for v in rec.coords[row]]
            parts.append(str(int(rec.inlier_counts[row])))
            parts.append(_fmt(rec.costs[row]))
            parts.append(str(int(rec.degenerate[row])))
            parts.append(str(int(rec.desc_assignment[row])))
            parts.append(str(int(rec.assign_ties[row])))
            yield " ".join(parts)

    _write_text(path, header, lines())


def read_recovered(path) -> RecoveredCloud:
    header, records = _split_records(Path(path).read_bytes(), "recovered")
    m = int(header["m"])
    n = len(records)
    subjects = np.empty((n, 2), dtype=np.int64)
    coords = np.empty((n, m))
    counts = np.empty(n, dtype=np.int64)
    costs = np.empty(n)
    degenerate = np.empty(n, dtype=bool)
    assignment = np.empty(n, dtype=np.int8)
    ties = np.empty(n, dtype=bool)
    for row, (offset, line) in enumerate(records):
        parts = _tokens(line, offset, 2 + m + 5)
        subjects[row] = (_parse_int(parts[0], offset), _parse_int(parts[1], offset))
        coords[row] = [_parse_float(p, offset) for p in parts[2 : 2 + m]]
        counts[row] = _parse_int(parts[2 + m], offset)
        costs[row] = _parse_float(parts[3 + m], offset)
        degenerate[row] = bool(_parse_int(parts[4 + m], offset))
        assignment[row] = _parse_int(parts[5 + m], offset)
        ties[row] = bool(_parse_int(parts[6 + m], offset))
    return RecoveredCloud(
        scheme=header["scheme"],
        dimension=m,
        subjects=subjects,
        coords=coords,
        inlier_counts=counts,
        costs=costs,
        degenerate=degenerate,
        metadata=header.get("metadata", {}),
        desc_assignment=assignment,
        assign_ties=ties,
    )


# --------------------------------------------------------------- reports


def write_report(payload: dict, path) -> None:
    header = {"format": "report", "version": FORMAT_VERSION, "n": 1}
    _write_text(path, header, [_dump_json(payload)])


def read_report(path) -> dict:
    data = Path(path).read_bytes()
    _, records = _split_records(data, "report")
    if not records:
        raise ParseError("missing report payload line", len(data))
    offset, line = records[0]
    try:
        return json.loads(line)
    except json.JSONDecodeError:
        raise ParseError("report payload is not valid JSON", offset) from None


# --------------------------------------------------------------- sidecar


def write_sidecar(sidecar: GroundTruthSidecar, path) -> None:
    cloud = sidecar.cloud
    header = {
        "format": "sidecar",
        "version": FORMAT_VERSION,
        "m": cloud.dimension,
        "n": 1,
        "descriptor_dim": cloud.descriptor_dim,
    }
    payload = {
        "points": [
            [int(pid)] + [float(v) for v in cloud.coords[row]]
            for row, pid in enumerate(cloud.ids)
        ],
        "descriptors": None if cloud.descriptors is None else cloud.descriptors,
        "cloud_metadata": cloud.metadata,
        "links": {str(int(k)): [int(s) for s in v] for k, v in sidecar.links.items()},
        "ppl_desc_slots": None
        if sidecar.ppl_desc_slots is None
        else {str(int(k)): [int(s) for s in v] for k, v in sidecar.ppl_desc_slots.items()},
        "cp_axes": None
        if sidecar.cp_axes is None
        else {str(int(k)): int(v) for k, v in sidecar.cp_axes.items()},
        "labels": sidecar.labels,
    }
    _write_text(path, header, [_dump_json(payload)])


def read_sidecar(path) -> GroundTruthSidecar:
    data = Path(path).read_bytes()
    header, records = _split_records(data, "sidecar")
    if not records:
        raise ParseError("missing sidecar payload line", len(data))
    offset, line = records[0]
    try:
        payload = json.loads(line)
    except json.JSONDecodeError:
        raise ParseError("sidecar payload is not valid JSON", offset) from None
    m = int(header["m"])
    points = payload["points"]
    ids = np.array([int(p[0]) for p in points], dtype=np.int64)
    coords = np.array([p[1:] for p in points], dtype=np.float64).reshape(len(points), m)
    desc = payload.get("descriptors")
    cloud = PointCloud(
        dimension=m,
        ids=ids,
        coords=coords,
        descriptors=None if desc is None else np.asarray(desc, dtype=np.float64),
        metadata=payload.get("cloud_metadata", {}),
    )
    slots = payload.get("ppl_desc_slots")
    cp_axes = payload.get("cp_axes")
    return GroundTruthSidecar(
        cloud=cloud,
        links={int(k): tuple(v) for k, v in payload["links"].items()},
        ppl_desc_slots=None
        if slots is None
        else {int(k): tuple(v) for k, v in slots.items()},
        cp_axes=None if cp_axes is None else {int(k): int(v) for k, v in cp_axes.items()},
        labels=payload.get("labels", {}),
    )


# --------------------------------------------------------------- SfM import


def read_points3d_text(path) -> PointCloud:
    """Import a points3D-style table: id, x, y, z, remaining columns ignored."""
    data = Path(path).read_bytes()
    ids, coords = [], []
    offset = 0
    for raw in data.split(b"\n"):
        line = raw.decode("utf-8", errors="replace").strip()
        if line and not line.startswith("#"):
            parts = line.split()
            if len(parts) < 4:
                raise ParseError("points3D row needs id and three coordinates", offset)
            ids.append(_parse_int(parts[0], offset))
            coords.append([_parse_float(p, offset) for p in parts[1:4]])
        offset += len(raw) + 1
    if not ids:
        raise ParseError("no points3D records found", len(data))
    return PointCloud(
        dimension=3,
        ids=np.asarray(ids, dtype=np.int64),
        coords=np.asarray(coords, dtype=np.float64),
        metadata={"source": "points3D", "units": "m"},
    )
