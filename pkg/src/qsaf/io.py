"""Image, CSV and JSON input/output."""
from __future__ import annotations

import csv
import json
import re
from pathlib import Path

import numpy as np

DIAGNOSTICS_HEADER = ("iter", "purity_gap_max", "potential_J")


class FormatError(ValueError):
    """Malformed input file."""


_PNM_TOKEN = re.compile(rb"(?:\s*(?:#[^\n]*\n)*\s*)([^\s#]+)")


def _pnm_header(data: bytes):
    pos = 0
    tokens = []
    while len(tokens) < 4:
        m = _PNM_TOKEN.match(data, pos)
        if m is None:
            raise FormatError("truncated PPM header")
        tokens.append(m.group(1))
        pos = m.end()
    return tokens, pos


def read_ppm(path) -> np.ndarray:
    """Read a binary (P6) or ASCII (P3) PPM file as ``uint8`` array of shape (h, w, 3)."""
    data = Path(path).read_bytes()
    try:
        (magic, w, h, maxval), pos = _pnm_header(data)
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise FormatError(f"{path}: malformed PPM header") from exc
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit PPM supported (maxval {maxval})")
    if magic == b"P6":
        body = data[pos + 1 : pos + 1 + 3 * w * h]
        if len(body) != 3 * w * h:
            raise FormatError(f"{path}: pixel data truncated")
        return np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3).copy()
    if magic == b"P3":
        values = data[pos:].split()
        if len(values) < 3 * w * h:
            raise FormatError(f"{path}: pixel data truncated")
        return np.array([int(v) for v in values[: 3 * w * h]], dtype=np.uint8).reshape(h, w, 3)
    raise FormatError(f"{path}: not a PPM file (magic {magic!r})")


def write_ppm(path, image) -> None:
    img = np.asarray(image)
    if img.dtype != np.uint8 or img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("write_ppm expects a uint8 array of shape (h, w, 3)")
    h, w, _ = img.shape
    Path(path).write_bytes(b"P6\n%d %d\n255\n" % (w, h) + img.tobytes())


def read_image(path) -> np.ndarray:
    """Read PPM or PNG (any mode Pillow understands) as RGB ``uint8``."""
    path = Path(path)
    if path.suffix.lower() in (".ppm", ".pnm"):
        return read_ppm(path)
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()
    except (UnidentifiedImageError, OSError) as exc:
        raise FormatError(f"{path}: unreadable image ({exc})") from exc


def write_image(path, image) -> None:
    """Write an RGB ``uint8`` image; format chosen by suffix (``.ppm`` or ``.png``)."""
    path = Path(path)
    img = np.asarray(image)
    if path.suffix.lower() == ".ppm":
        write_ppm(path, img)
        return
    from PIL import Image

    Image.fromarray(img).save(path, format="PNG")


def to_uint8(x) -> np.ndarray:
    """Scale values in ``[0, 1]`` to ``uint8`` with rounding."""
    return np.clip(np.rint(np.asarray(x, dtype=float) * 255.0), 0, 255).astype(np.uint8)


def gray_to_rgb(g) -> np.ndarray:
    g = to_uint8(g)
    return np.repeat(g[..., None], 3, axis=-1)


def rgb_to_gray(img) -> np.ndarray:
    """Luma in ``[0, 1]`` from an RGB ``uint8`` image (ITU-R 601 weights)."""
    img = np.asarray(img, dtype=float) / 255.0
    return img @ np.array([0.299, 0.587, 0.114])


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_csv(path):
    """Return ``(header, rows)`` with numeric cells parsed as floats."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration as exc:
            raise FormatError(f"{path}: empty CSV") from exc
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise FormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: non-numeric cell") from exc
    return header, rows


def write_diagnostics(path, diagnostics) -> None:
    rows = ((int(t), gap, J) for t, gap, J in np.asarray(diagnostics))
    write_csv(path, DIAGNOSTICS_HEADER, rows)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path, payload) -> None:
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True, allow_nan=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


def read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc


def matrix_to_json(M):
    M = np.asarray(M, dtype=complex)
    return {"real": M.real.tolist(), "imag": M.imag.tolist()}


def matrix_from_json(obj) -> np.ndarray:
    if isinstance(obj, dict):
        return np.asarray(obj["real"], dtype=float) + 1j * np.asarray(obj.get("imag", 0.0), dtype=float)
    return np.asarray(obj, dtype=complex)


def read_matrix(path) -> np.ndarray:
    """Load a square matrix from ``.npy``, ``.json`` (real/imag lists) or ``.csv`` (real)."""
    path = Path(path)
    try:
        if path.suffix == ".npy":
            M = np.load(path)
        elif path.suffix == ".json":
            M = matrix_from_json(read_json(path))
        else:
            M = np.loadtxt(path, delimiter=",", dtype=float)
    except (OSError, ValueError, KeyError) as exc:
        raise FormatError(f"{path}: cannot read matrix ({exc})") from exc
    M = np.atleast_2d(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise FormatError(f"{path}: expected a square matrix, got shape {M.shape}")
    return M
