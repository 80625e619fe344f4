"""Bundle export: CSV node tables and a compact little-endian binary dump.

Binary layout: the 8-byte magic ``b"JCTLBND1"``, a little-endian ``uint32``
header length, a UTF-8 JSON header (config hash, seed, sigma, sizes), then the
arrays ``offsets`` (int64), ``path_ids`` (int64), ``x0``, ``x_T``, ``grid``,
``t``, ``x``, ``a``, ``dB``, ``jump_pos`` (int64), ``jump_z``, ``jump_gamma``
and ``jump_post``, all little-endian 64-bit.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .simulate import PathBundle

MAGIC = b"JCTLBND1"
_FIELDS = (
    ("offsets", "<i8"), ("path_ids", "<i8"), ("x0", "<f8"), ("x_T", "<f8"), ("grid", "<f8"),
    ("t", "<f8"), ("x", "<f8"), ("a", "<f8"), ("dB", "<f8"),
    ("jump_pos", "<i8"), ("jump_z", "<f8"), ("jump_gamma", "<f8"), ("jump_post", "<f8"),
)


def write_bundle_csv(bundle: PathBundle, path) -> Path:
    """One row per node: ``path_id, t, x, a, dB, jump_z``.

    ``x`` is the left limit; at a jump node ``jump_z`` holds the size, otherwise
    it is empty. ``a`` and ``dB`` are empty at each path's final node.
    """
    bundle._need_full()
    path = Path(path)
    jz = np.full(bundle.n_nodes, np.nan)
    jz[bundle.jump_pos] = bundle.jump_z
    pid = bundle.path_ids[bundle.node_path]

    def fmt(v):
        return "" if np.isnan(v) else repr(float(v))

    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path_id", "t", "x", "a", "dB", "jump_z"])
        for i in range(bundle.n_nodes):
            w.writerow([int(pid[i]), fmt(bundle.t[i]), fmt(bundle.x[i]), fmt(bundle.a[i]), fmt(bundle.dB[i]),
                        fmt(jz[i])])
    return path


def write_bundle_binary(bundle: PathBundle, path, config_hash: str = "") -> Path:
    bundle._need_full()
    header = {
        "config_hash": config_hash,
        "seed": int(bundle.seed),
        "sigma": float(bundle.sigma),
        "sizes": {name: int(np.size(getattr(bundle, name))) for name, _ in _FIELDS},
    }
    blob = json.dumps(header, sort_keys=True).encode()
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for name, dt in _FIELDS:
            fh.write(np.ascontiguousarray(getattr(bundle, name), dtype=dt).tobytes())
    return path


def read_bundle_binary(path):
    """Returns ``(bundle, header)``."""
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ValueError("not a bundle dump")
    (hlen,) = struct.unpack("<I", data[8:12])
    header = json.loads(data[12:12 + hlen].decode())
    pos = 12 + hlen
    arrays = {}
    for name, dt in _FIELDS:
        n = header["sizes"][name]
        arrays[name] = np.frombuffer(data, dtype=dt, count=n, offset=pos).astype(dt[1:]).copy()
        pos += 8 * n
    bundle = PathBundle(seed=header["seed"], sigma=header["sigma"], **arrays)
    return bundle, header
