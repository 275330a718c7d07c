"""Binary ``GRB1`` container for reduced models.

Layout::

    b"GRB1" | u32 LE header length | UTF-8 JSON header
    | float64 LE arrays, row-major, in manifest order
    | u64 LE CRC-64/XZ of every preceding byte

The manifest lists ``(name, shape)`` pairs; bases are stored as
``(M, n)`` blocks, one basis vector per row.
"""

import json
import os
import struct
import tempfile

import numba
import numpy as np

from .errors import ArtifactError
from .params import ParamBox
from .rom import FORMAT_VERSION, ReducedModel

__all__ = ["save_rom", "load_rom", "read_header", "crc64", "to_bytes", "from_bytes"]

MAGIC = b"GRB1"
_POLY = 0xC96C5795D7870F42  # reflected ECMA-182


def _make_table():
    table = np.zeros(256, dtype=np.uint64)
    for i in range(256):
        c = i
        for _ in range(8):
            c = (c >> 1) ^ _POLY if c & 1 else c >> 1
        table[i] = c
    return table


_TABLE = _make_table()


@numba.njit(cache=True)
def _crc64_update(table, data, crc):
    for b in data:
        crc = table[(crc ^ np.uint64(b)) & np.uint64(0xFF)] ^ (crc >> np.uint64(8))
    return crc


def crc64(data):
    """CRC-64/XZ checksum of a bytes-like object."""
    buf = np.frombuffer(bytes(data) if not isinstance(data, (bytes, bytearray)) else data,
                        dtype=np.uint8)
    crc = _crc64_update(_TABLE, buf, np.uint64(0xFFFFFFFFFFFFFFFF))
    return int(crc) ^ 0xFFFFFFFFFFFFFFFF


def _arrays(rm):
    out = []
    for q in range(rm.Q):
        out.append((f"A1_{q + 1}", rm.A1[q]))
    out += [("l1", rm.l1), ("lo1", rm.lo1)]
    for q in range(rm.Q):
        out.append((f"A2_{q + 1}", rm.A2[q]))
    out += [("l2", rm.l2), ("lo2", rm.lo2), ("B1", rm.B1), ("B2", rm.B2), ("B12", rm.B12)]
    if rm.has_bases:
        out += [("phi", rm.phi.T), ("psi", rm.psi.T)]
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def to_bytes(rm):
    arrays = _arrays(rm)
    header = {
        "format_version": FORMAT_VERSION,
        "Q": rm.Q,
        "M1": rm.M1,
        "M2": rm.M2,
        "N": rm.meta.get("N"),
        "L": rm.meta.get("L"),
        "activation": rm.meta.get("activation"),
        "theta": list(rm.theta_names),
        "fom": rm.meta.get("fom"),
        "box": rm.box.to_dict(),
        "flags": {"bases": rm.has_bases, "capped": bool(rm.meta.get("capped", False))},
        "meta": _jsonable(rm.meta),
        "sample": None if rm.sample is None else rm.sample.tolist(),
        "arrays": [[name, list(np.shape(a))] for name, a in arrays],
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", len(hbytes)), hbytes]
    for _, a in arrays:
        parts.append(np.ascontiguousarray(a, dtype="<f8").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<Q", crc64(body))


def _parse_header(blob):
    if len(blob) < 8 or blob[:4] != MAGIC:
        raise ArtifactError("not a GRB1 artifact (bad magic)")
    (hlen,) = struct.unpack("<I", blob[4:8])
    if 8 + hlen > len(blob):
        raise ArtifactError("truncated artifact header")
    try:
        header = json.loads(blob[8 : 8 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArtifactError(f"unreadable artifact header: {exc}") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise ArtifactError(
            f"unsupported format version {header.get('format_version')!r}"
        )
    return header, 8 + hlen


def from_bytes(blob):
    header, offset = _parse_header(blob)
    sizes = [int(np.prod(shape, dtype=np.int64)) for _, shape in header["arrays"]]
    expected = offset + 8 * sum(sizes) + 8
    if len(blob) != expected:
        raise ArtifactError(
            f"artifact has {len(blob)} bytes, header implies {expected} (truncated?)"
        )
    (stored,) = struct.unpack("<Q", blob[-8:])
    if crc64(blob[:-8]) != stored:
        raise ArtifactError("checksum mismatch")
    arrays = {}
    pos = offset
    for (name, shape), size in zip(header["arrays"], sizes):
        a = np.frombuffer(blob, dtype="<f8", count=size, offset=pos).astype(float)
        arrays[name] = a.reshape(shape)
        pos += 8 * size
    Q = header["Q"]
    try:
        rm = ReducedModel(
            A1=np.stack([arrays[f"A1_{q + 1}"] for q in range(Q)]),
            l1=arrays["l1"],
            lo1=arrays["lo1"],
            A2=np.stack([arrays[f"A2_{q + 1}"] for q in range(Q)]),
            l2=arrays["l2"],
            lo2=arrays["lo2"],
            B1=arrays["B1"],
            B2=arrays["B2"],
            B12=arrays["B12"],
            theta_names=tuple(header["theta"]),
            box=ParamBox(tuple(header["box"]["lo"]), tuple(header["box"]["hi"])),
            meta=header["meta"],
            sample=None if header["sample"] is None else np.array(header["sample"]),
            phi=arrays["phi"].T.copy() if "phi" in arrays else None,
            psi=arrays["psi"].T.copy() if "psi" in arrays else None,
        )
    except KeyError as exc:
        raise ArtifactError(f"artifact lacks array {exc}") from exc
    return rm


def save_rom(rm, path):
    """Write atomically (temp file in the target directory, then rename)."""
    data = to_bytes(rm)
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".grb-", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_rom(path):
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise ArtifactError(f"cannot read artifact: {exc}") from exc
    return from_bytes(blob)


def read_header(path):
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise ArtifactError(f"cannot read artifact: {exc}") from exc
    header, _ = _parse_header(blob)
    return header
