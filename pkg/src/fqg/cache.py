"""Persistent binary cache for intertwiner matrices.

File format (little endian):
    magic   "FQGC" (4 bytes)
    version u32
    N       u32
    F-hash  32 bytes (sha256 over the parameter matrix)
    kind    u8
    levels  u32 x 3
    rows    u32
    cols    u32
    payload rows*cols complex128 as (re, im) f64 pairs, column-major

Writes are atomic (tempfile + rename), so concurrent readers always see a
complete object; last writer wins per key.  A JSON index keeps payload
checksums for offline verification.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"FQGC"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sII32sBIIIII")
# kinds
KIND_JW = 1
KIND_BASIS = 2
KIND_CHAIN_R = 3
KIND_CHAIN_L = 4
KIND_FUSION = 5
KIND_CONJ = 6

KIND_NAMES = {
    KIND_JW: "jw",
    KIND_BASIS: "basis",
    KIND_CHAIN_R: "chain_r",
    KIND_CHAIN_L: "chain_l",
    KIND_FUSION: "fusion",
    KIND_CONJ: "conj",
}


class CacheError(RuntimeError):
    pass


def _key_digest(N: int, f_hash: bytes, kind: int, levels: tuple[int, int, int]) -> str:
    h = hashlib.sha256()
    h.update(N.to_bytes(4, "little"))
    h.update(f_hash)
    h.update(bytes([kind]))
    for lv in levels:
        h.update(int(lv).to_bytes(4, "little"))
    return h.hexdigest()[:24]


class MatrixCache:
    """Content-addressed store of complex matrices keyed by (params, kind, levels)."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.index_path = self.directory / "index.json"

    # -- index helpers -------------------------------------------------
    def _load_index(self) -> dict:
        try:
            with open(self.index_path) as fh:
                return json.load(fh)
        except (FileNotFoundError, json.JSONDecodeError):
            return {}

    def _store_index(self, index: dict) -> None:
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            json.dump(index, fh, indent=0, sort_keys=True)
        os.replace(tmp, self.index_path)

    def _path(self, digest: str) -> Path:
        return self.directory / f"{digest}.fqgc"

    # -- core API ------------------------------------------------------
    def put(self, N: int, f_hash: bytes, kind: int, levels: tuple[int, int, int],
            matrix: np.ndarray) -> Path:
        matrix = np.asarray(matrix, dtype=np.complex128)
        if matrix.ndim == 1:
            matrix = matrix[:, None]
        rows, cols = matrix.shape
        payload = np.asfortranarray(matrix).tobytes(order="F")
        header = _HEADER.pack(MAGIC, FORMAT_VERSION, N, f_hash, kind,
                              levels[0], levels[1], levels[2], rows, cols)
        digest = _key_digest(N, f_hash, kind, levels)
        path = self._path(digest)
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        with os.fdopen(fd, "wb") as fh:
            fh.write(header)
            fh.write(payload)
        os.replace(tmp, path)
        index = self._load_index()
        index[digest] = {
            "kind": KIND_NAMES.get(kind, str(kind)),
            "N": N,
            "f_hash": f_hash.hex(),
            "levels": list(levels),
            "rows": rows,
            "cols": cols,
            "payload_sha256": hashlib.sha256(payload).hexdigest(),
        }
        self._store_index(index)
        return path

    def get(self, N: int, f_hash: bytes, kind: int,
            levels: tuple[int, int, int]) -> np.ndarray | None:
        """Read a cached matrix; any mismatch or corruption is a miss."""
        digest = _key_digest(N, f_hash, kind, levels)
        path = self._path(digest)
        try:
            with open(path, "rb") as fh:
                raw_header = fh.read(_HEADER.size)
                if len(raw_header) < _HEADER.size:
                    return None
                (magic, version, n_stored, fh_stored, kind_stored,
                 l1, l2, l3, rows, cols) = _HEADER.unpack(raw_header)
                if (magic != MAGIC or version != FORMAT_VERSION
                        or n_stored != N or fh_stored != f_hash
                        or kind_stored != kind or (l1, l2, l3) != tuple(levels)):
                    return None
                payload = fh.read(rows * cols * 16)
                if len(payload) != rows * cols * 16:
                    return None
        except FileNotFoundError:
            return None
        flat = np.frombuffer(payload, dtype=np.complex128)
        return flat.reshape((rows, cols), order="F").copy()

    # -- administration ------------------------------------------------
    def list_entries(self) -> list[dict]:
        index = self._load_index()
        out = []
        for digest, meta in sorted(index.items()):
            path = self._path(digest)
            meta = dict(meta)
            meta["digest"] = digest
            meta["bytes"] = path.stat().st_size if path.exists() else 0
            meta["present"] = path.exists()
            out.append(meta)
        return out

    def verify(self) -> list[dict]:
        """Recompute payload checksums; return one record per entry."""
        index = self._load_index()
        report = []
        for digest, meta in sorted(index.items()):
            path = self._path(digest)
            status = "ok"
            if not path.exists():
                status = "missing"
            else:
                with open(path, "rb") as fh:
                    fh.seek(_HEADER.size)
                    payload = fh.read()
                if hashlib.sha256(payload).hexdigest() != meta["payload_sha256"]:
                    status = "corrupt"
            report.append({"digest": digest, "kind": meta["kind"],
                           "levels": meta["levels"], "status": status})
        return report

    def purge(self, f_hash: bytes | None = None) -> int:
        """Remove entries for one parameter family (or everything)."""
        index = self._load_index()
        keep = {}
        removed = 0
        for digest, meta in index.items():
            if f_hash is None or meta["f_hash"] == f_hash.hex():
                self._path(digest).unlink(missing_ok=True)
                removed += 1
            else:
                keep[digest] = meta
        self._store_index(keep)
        return removed
