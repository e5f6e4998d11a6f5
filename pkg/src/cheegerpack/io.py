"""File formats: raw field dumps, CSV, PGM renders, SVG packing overlays, JSON."""

from __future__ import annotations

import csv
import json
import math
import struct
from pathlib import Path

import numpy as np

from .grid import GridSpec

HEADER_BYTES = 16


class FormatError(ValueError):
    pass


def write_field(path, f: np.ndarray) -> None:
    """Little-endian float64 dump after a 16-byte header: dim, then m per axis (uint32)."""
    f = np.asarray(f, dtype="<f8")
    if not 1 <= f.ndim <= 3:
        raise FormatError("only 1-, 2- and 3-D fields fit the header")
    header = struct.pack(f"<{1 + f.ndim}I", f.ndim, *f.shape).ljust(HEADER_BYTES, b"\0")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(f).tobytes())


def read_field(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < HEADER_BYTES:
        raise FormatError("file too short for a field header")
    dim = struct.unpack_from("<I", data, 0)[0]
    if not 1 <= dim <= 3:
        raise FormatError(f"bad dimension {dim} in header")
    shape = struct.unpack_from(f"<{dim}I", data, 4)
    n = int(np.prod(shape))
    if len(data) != HEADER_BYTES + 8 * n:
        raise FormatError("payload size does not match the header")
    return np.frombuffer(data, dtype="<f8", offset=HEADER_BYTES).reshape(shape).astype(float)


def write_field_csv(path, f: np.ndarray, grid: GridSpec) -> None:
    """One node per row: coordinates then value."""
    coords = grid.coordinates().reshape(-1, grid.dim)
    names = ["x", "y", "z"][: grid.dim]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["value"])
        for p, v in zip(coords, np.asarray(f).ravel()):
            w.writerow([repr(float(c)) for c in p] + [repr(float(v))])


def _image(u: np.ndarray) -> np.ndarray:
    """Node array (x, y) to image rows (y descending), columns x."""
    if u.ndim != 2:
        raise FormatError("PGM renders need 2-D data")
    return np.asarray(u)[:, ::-1].T


def write_pgm(path, u: np.ndarray) -> None:
    """Binary P5 grayscale, maxval 255, pixel = round(255 u)."""
    img = np.rint(255.0 * np.clip(_image(u), 0.0, 1.0)).astype(np.uint8)
    _write_p5(path, img)


def _write_p5(path, img: np.ndarray) -> None:
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img, dtype=np.uint8).tobytes())


def read_pgm(path) -> np.ndarray:
    """Return the raw image (rows, columns) of a P5 file."""
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos].decode("ascii"))
    if tokens[0] != "P5":
        raise FormatError("not a binary PGM")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval > 255:
        raise FormatError("16-bit PGM not supported")
    pos += 1
    return np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos).reshape(h, w)


def composite_labels(phases: np.ndarray, inside: np.ndarray, level: float = 0.0) -> np.ndarray:
    """0 outside every phase, else 1 + argmax phase index."""
    lab = np.argmax(phases, axis=0) + 1
    lab[(phases.max(axis=0) <= level) | ~inside] = 0
    return lab


def write_composite_pgm(path, phases: np.ndarray, inside: np.ndarray) -> None:
    """Pixel = argmax phase index spread over gray levels; background black."""
    k = phases.shape[0]
    lab = composite_labels(phases, inside, 0.05)
    gray = np.where(lab > 0, np.rint(55 + 200 * (lab - 1) / max(k - 1, 1)), 0).astype(np.uint8)
    _write_p5(path, _image(gray))


def write_polyline_csv(path, points: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y"])
        for x, y in np.asarray(points):
            w.writerow([repr(float(x)), repr(float(y))])


def write_trace_csv(path, stages) -> None:
    """Energy trace of every stage: stage, m, eps, iteration, value."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["stage", "m", "eps", "iteration", "value"])
        for s_idx, st in enumerate(stages):
            for it, v in enumerate(st.report.value_trace):
                w.writerow([s_idx, st.m, repr(st.eps), it, repr(float(v))])


def _domain_svg(domain, tx) -> str:
    kind = domain.kind
    if kind == "ball":
        (cx, cy), r = tx(domain.center), domain.radius * tx.scale
        return f'<circle cx="{cx:.4f}" cy="{cy:.4f}" r="{r:.4f}" fill="white" stroke="black"/>'
    if kind == "rectangle":
        lo, hi = domain.bounds()
        verts = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
    else:
        verts = domain.outline()
    pts = " ".join(f"{x:.4f},{y:.4f}" for x, y in (tx(v) for v in verts))
    return f'<polygon points="{pts}" fill="white" stroke="black"/>'


class _Transform:
    def __init__(self, lower, upper, size):
        span = float(max(upper[0] - lower[0], upper[1] - lower[1]))
        self.scale = (size - 20) / span
        self.lower = np.asarray(lower, dtype=float)
        self.height = float(upper[1] - lower[1]) * self.scale + 20

    def __call__(self, p):
        x = 10 + (p[0] - self.lower[0]) * self.scale
        y = self.height - 10 - (p[1] - self.lower[1]) * self.scale
        return x, y


def write_packing_svg(path, result, size: int = 400) -> None:
    """Disks over the domain outline (first two coordinates for 3-D packings)."""
    cfg = result.config
    lower, upper = cfg.domain.bounds()
    tx = _Transform(lower[:2], upper[:2], size)
    width = (upper[0] - lower[0]) * tx.scale + 20
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{tx.height:.0f}">',
        _domain_svg(cfg.domain, tx) if cfg.dim == 2 else "",
    ]
    for c, r in zip(cfg.centers, cfg.radii):
        cx, cy = tx(c[:2])
        parts.append(f'<circle cx="{cx:.4f}" cy="{cy:.4f}" r="{r * tx.scale:.4f}" fill="none" stroke="red"/>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(p for p in parts if p) + "\n")


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(jsonable(obj), indent=2) + "\n")
