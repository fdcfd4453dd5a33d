"""OBJ and PLY readers/writers.

Supported inputs: ASCII OBJ (v/f records, optional vertex colors), ASCII PLY,
and binary little-endian PLY. Faces with more than three vertices are fan
triangulated; vertex order is always preserved because vertex indices are the
stable identity everything downstream hangs on.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ParseError

_PLY_SCALARS = {
    "char": ("b", 1), "int8": ("b", 1),
    "uchar": ("B", 1), "uint8": ("B", 1),
    "short": ("h", 2), "int16": ("h", 2),
    "ushort": ("H", 2), "uint16": ("H", 2),
    "int": ("i", 4), "int32": ("i", 4),
    "uint": ("I", 4), "uint32": ("I", 4),
    "float": ("f", 4), "float32": ("f", 4),
    "double": ("d", 8), "float64": ("d", 8),
}


def parse_obj(path) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Read an ASCII OBJ file. Returns (vertices, faces, colors-or-None)."""
    vertices: list[list[float]] = []
    colors: list[list[float]] = []
    faces: list[tuple[int, int, int]] = []

    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            tag = fields[0]
            if tag == "v":
                if len(fields) < 4:
                    raise ParseError("vertex record needs 3 coordinates",
                                     path=path, line=lineno)
                try:
                    vals = [float(x) for x in fields[1:]]
                except ValueError as exc:
                    raise ParseError(f"bad vertex value: {exc}",
                                     path=path, line=lineno) from exc
                vertices.append(vals[:3])
                if len(vals) >= 6:
                    colors.append(vals[3:6])
            elif tag == "f":
                if len(fields) < 4:
                    raise ParseError("face record needs >= 3 vertices",
                                     path=path, line=lineno)
                idx = [_obj_face_index(tok, len(vertices), path, lineno)
                       for tok in fields[1:]]
                for a, b in zip(idx[1:-1], idx[2:]):
                    faces.append((idx[0], a, b))
            # vt/vn/g/o/s/usemtl/mtllib and anything else: not our problem

    if not vertices:
        raise ParseError("no vertices found", path=path)
    verts = np.asarray(vertices, dtype=float)
    face_arr = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    color_arr = None
    if len(colors) == len(vertices):
        color_arr = np.clip(np.asarray(colors, dtype=float), 0.0, 1.0)
    return verts, face_arr, color_arr


def _obj_face_index(token: str, n_seen: int, path, lineno: int) -> int:
    head = token.split("/")[0]
    try:
        idx = int(head)
    except ValueError as exc:
        raise ParseError(f"bad face index {token!r}", path=path,
                         line=lineno) from exc
    if idx == 0:
        raise ParseError("OBJ face indices are 1-based, got 0",
                         path=path, line=lineno)
    # negative indices are relative to the vertices parsed so far
    return idx - 1 if idx > 0 else n_seen + idx


def parse_ply(path) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Read an ASCII or binary-little-endian PLY file."""
    with open(path, "rb") as fh:
        data = fh.read()

    header_end = data.find(b"end_header")
    if not data.startswith(b"ply") or header_end < 0:
        raise ParseError("not a PLY file (missing header)", path=path)
    header_end = data.find(b"\n", header_end) + 1
    header = data[:header_end].decode("ascii", errors="replace")
    body = data[header_end:]

    fmt = None
    elements: list[dict] = []
    for lineno, line in enumerate(header.splitlines(), start=1):
        fields = line.strip().split()
        if not fields or fields[0] in ("ply", "comment", "obj_info", "end_header"):
            continue
        if fields[0] == "format":
            fmt = fields[1]
        elif fields[0] == "element":
            if len(fields) != 3:
                raise ParseError("malformed element line", path=path, line=lineno)
            elements.append({"name": fields[1], "count": int(fields[2]),
                             "props": []})
        elif fields[0] == "property":
            if not elements:
                raise ParseError("property before any element", path=path,
                                 line=lineno)
            if fields[1] == "list":
                if len(fields) != 5:
                    raise ParseError("malformed list property", path=path,
                                     line=lineno)
                elements[-1]["props"].append(("list", fields[2], fields[3],
                                              fields[4]))
            else:
                if len(fields) != 3:
                    raise ParseError("malformed property line", path=path,
                                     line=lineno)
                elements[-1]["props"].append(("scalar", fields[1], fields[2]))
        else:
            raise ParseError(f"unknown header keyword {fields[0]!r}",
                             path=path, line=lineno)

    if fmt == "ascii":
        rows = _ply_ascii_rows(body, elements, path)
    elif fmt == "binary_little_endian":
        rows = _ply_binary_rows(body, elements, path)
    elif fmt == "binary_big_endian":
        raise ParseError("big-endian PLY is not supported", path=path)
    else:
        raise ParseError(f"unknown PLY format {fmt!r}", path=path)

    return _ply_extract(rows, elements, path)


def _ply_ascii_rows(body: bytes, elements: list[dict], path) -> dict:
    tokens = body.decode("ascii", errors="replace").split()
    pos = 0
    rows: dict[str, list] = {}
    for elem in elements:
        out = []
        for _ in range(elem["count"]):
            row = {}
            for prop in elem["props"]:
                try:
                    if prop[0] == "list":
                        n = int(tokens[pos]); pos += 1
                        row[prop[3]] = [float(tokens[pos + i]) for i in range(n)]
                        pos += n
                    else:
                        row[prop[2]] = float(tokens[pos]); pos += 1
                except (IndexError, ValueError) as exc:
                    raise ParseError(
                        f"truncated or malformed {elem['name']} data: {exc}",
                        path=path) from exc
            out.append(row)
        rows[elem["name"]] = out
    return rows


def _ply_binary_rows(body: bytes, elements: list[dict], path) -> dict:
    rows: dict[str, list] = {}
    offset = 0
    for elem in elements:
        props = elem["props"]
        out = []
        if all(p[0] == "scalar" for p in props):
            # fixed-size rows: decode the whole block at once
            dtype = np.dtype([(p[2], "<" + _ply_np(p[1], path)) for p in props])
            need = dtype.itemsize * elem["count"]
            if offset + need > len(body):
                raise ParseError(f"truncated {elem['name']} block", path=path)
            block = np.frombuffer(body, dtype=dtype, count=elem["count"],
                                  offset=offset)
            offset += need
            names = [p[2] for p in props]
            for rec in block:
                out.append({nm: float(rec[nm]) for nm in names})
        else:
            for _ in range(elem["count"]):
                row = {}
                for prop in props:
                    try:
                        if prop[0] == "list":
                            cfmt, csz = _ply_struct(prop[1], path)
                            (n,) = struct.unpack_from("<" + cfmt, body, offset)
                            offset += csz
                            vfmt, vsz = _ply_struct(prop[2], path)
                            vals = struct.unpack_from(f"<{int(n)}{vfmt}", body,
                                                      offset)
                            offset += vsz * int(n)
                            row[prop[3]] = [float(v) for v in vals]
                        else:
                            vfmt, vsz = _ply_struct(prop[1], path)
                            (v,) = struct.unpack_from("<" + vfmt, body, offset)
                            offset += vsz
                            row[prop[2]] = float(v)
                    except struct.error as exc:
                        raise ParseError(
                            f"truncated {elem['name']} block: {exc}",
                            path=path) from exc
                out.append(row)
        rows[elem["name"]] = out
    return rows


def _ply_struct(type_name: str, path) -> tuple[str, int]:
    try:
        return _PLY_SCALARS[type_name]
    except KeyError as exc:
        raise ParseError(f"unknown PLY type {type_name!r}", path=path) from exc


def _ply_np(type_name: str, path) -> str:
    fmt, size = _ply_struct(type_name, path)
    kind = "f" if fmt in ("f", "d") else ("u" if fmt.isupper() else "i")
    return f"{kind}{size}"


def _ply_extract(rows: dict, elements: list[dict], path):
    if "vertex" not in rows:
        raise ParseError("PLY has no vertex element", path=path)
    vrows = rows["vertex"]
    try:
        verts = np.array([[r["x"], r["y"], r["z"]] for r in vrows], dtype=float)
    except KeyError as exc:
        raise ParseError(f"vertex element missing property {exc}",
                         path=path) from exc

    colors = None
    if vrows and all(k in vrows[0] for k in ("red", "green", "blue")):
        colors = np.array([[r["red"], r["green"], r["blue"]] for r in vrows],
                          dtype=float) / 255.0

    faces: list[tuple[int, int, int]] = []
    for r in rows.get("face", []):
        idx = r.get("vertex_indices", r.get("vertex_index"))
        if idx is None:
            raise ParseError("face element has no vertex index list", path=path)
        ints = [int(i) for i in idx]
        if len(ints) < 3:
            raise ParseError("face with fewer than 3 vertices", path=path)
        for a, b in zip(ints[1:-1], ints[2:]):
            faces.append((ints[0], a, b))
    return verts, np.asarray(faces, dtype=np.int64).reshape(-1, 3), colors


def save_obj(path, vertices: np.ndarray, faces: np.ndarray,
             colors: np.ndarray | None = None) -> None:
    """Write an ASCII OBJ (with optional per-vertex colors)."""
    lines = []
    if colors is not None:
        for v, c in zip(vertices, colors):
            vals = [repr(float(x)) for x in (*v, *c)]
            lines.append("v " + " ".join(vals))
    else:
        for v in vertices:
            lines.append(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}")
    for f in faces:
        lines.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_ply(path, vertices: np.ndarray, faces: np.ndarray,
             binary: bool = False) -> None:
    """Write a PLY file, ASCII or binary little-endian."""
    m, f = len(vertices), len(faces)
    header = (
        "ply\n"
        f"format {'binary_little_endian' if binary else 'ascii'} 1.0\n"
        f"element vertex {m}\n"
        "property double x\nproperty double y\nproperty double z\n"
        f"element face {f}\n"
        "property list uchar int vertex_indices\n"
        "end_header\n"
    )
    if binary:
        with open(path, "wb") as fh:
            fh.write(header.encode("ascii"))
            fh.write(np.asarray(vertices, dtype="<f8").tobytes())
            for face in faces:
                fh.write(struct.pack("<Biii", 3, int(face[0]), int(face[1]),
                                     int(face[2])))
    else:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(header)
            for v in vertices:
                fh.write(f"{float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
            for face in faces:
                fh.write(f"3 {face[0]} {face[1]} {face[2]}\n")
