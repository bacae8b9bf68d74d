"""Bit-exact binary snapshots of solver states.

Layout: a 64-byte magic+version header, one UTF-8 line holding a single
JSON metadata object (which declares the array names, shapes and dtypes in
order), the raw little-endian arrays (float64, complex128 stored as
interleaved float64 pairs), and a trailing 64-bit checksum (the first 8
bytes of the SHA-256 of everything before it).
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .evolvers import DKGSystemState, NLDState
from .grid import TorusGrid
from .kleingordon import Couplings, KGState
from .manybody import DensityMatrix

MAGIC = b"DKGLAB-SNAPSHOT-1"
HEADER = MAGIC.ljust(64, b"\0")

_DTYPES = {"f8": "<f8", "c16": "<c16"}


class SnapshotError(ValueError):
    """Malformed snapshot file (bad header, sizes, or checksum)."""


def write_snapshot(path, meta: dict, arrays: list[tuple[str, np.ndarray]]) -> None:
    declared = []
    payload = bytearray()
    for name, arr in arrays:
        arr = np.ascontiguousarray(arr)
        code = "c16" if np.iscomplexobj(arr) else "f8"
        arr = arr.astype(_DTYPES[code], copy=False)
        declared.append({"name": name, "shape": list(arr.shape), "dtype": code})
        payload += arr.tobytes()
    meta_line = json.dumps({"meta": meta, "arrays": declared}, sort_keys=True)
    blob = HEADER + meta_line.encode("utf-8") + b"\n" + bytes(payload)
    checksum = hashlib.sha256(blob).digest()[:8]
    Path(path).write_bytes(blob + checksum)


def read_snapshot(path) -> tuple[dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    if len(raw) < 64 + 1 + 8 or raw[:64] != HEADER:
        raise SnapshotError(f"malformed snapshot header in {path}")
    blob, checksum = raw[:-8], raw[-8:]
    if hashlib.sha256(blob).digest()[:8] != checksum:
        raise SnapshotError(f"checksum failure in {path}")
    newline = blob.index(b"\n", 64)
    try:
        declared = json.loads(blob[64:newline].decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise SnapshotError(f"bad metadata in {path}: {exc}") from exc
    arrays = {}
    offset = newline + 1
    for spec in declared["arrays"]:
        dtype = np.dtype(_DTYPES[spec["dtype"]])
        count = int(np.prod(spec["shape"], dtype=np.int64)) if spec["shape"] else 1
        nbytes = count * dtype.itemsize
        chunk = blob[offset:offset + nbytes]
        if len(chunk) != nbytes:
            raise SnapshotError(f"array {spec['name']} truncated in {path}")
        arrays[spec["name"]] = (
            np.frombuffer(chunk, dtype=dtype).reshape(spec["shape"]).copy()
        )
        offset += nbytes
    if offset != len(blob):
        raise SnapshotError(f"trailing bytes after declared arrays in {path}")
    return declared["meta"], arrays


# -- state-level wrappers -----------------------------------------------------


def _grid_meta(grid: TorusGrid) -> dict:
    return {"dim": grid.dim, "points": grid.n, "length": grid.length}


def _couplings_meta(c: Couplings) -> dict:
    return {
        "gamma_sigma": c.gamma_sigma,
        "gamma_omega": c.gamma_omega,
        "fermion_mass": c.fermion_mass,
    }


def save_state(path, state) -> None:
    """Snapshot a DKGSystemState, NLDState, or DensityMatrix."""
    if isinstance(state, DKGSystemState):
        meta = {
            "kind": "dkg",
            "grid": _grid_meta(state.grid),
            "couplings": _couplings_meta(state.couplings),
            "t": state.t,
            "m_sigma": state.kg.m_sigma,
            "m_omega": state.kg.m_omega,
        }
        arrays = [
            ("psi", state.psi),
            ("s", state.kg.s),
            ("s_dot", state.kg.s_dot),
            ("omega", state.kg.omega),
            ("omega_dot", state.kg.omega_dot),
        ]
    elif isinstance(state, NLDState):
        meta = {
            "kind": "nld",
            "grid": _grid_meta(state.grid),
            "couplings": _couplings_meta(state.couplings),
            "t": state.t,
        }
        arrays = [("psi", state.psi)]
    elif isinstance(state, DensityMatrix):
        meta = {"kind": "density-matrix", "grid": _grid_meta(state.grid)}
        arrays = [("orbitals", state.orbitals), ("occupations", state.occupations)]
    else:
        raise TypeError(f"cannot snapshot object of type {type(state).__name__}")
    write_snapshot(path, meta, arrays)


def load_state(path):
    meta, arrays = read_snapshot(path)
    g = meta.get("grid")
    grid = TorusGrid(g["dim"], g["points"], g["length"]) if g else None
    kind = meta.get("kind")
    if kind == "dkg":
        c = meta["couplings"]
        kg = KGState(
            s=arrays["s"],
            s_dot=arrays["s_dot"],
            omega=arrays["omega"],
            omega_dot=arrays["omega_dot"],
            m_sigma=meta["m_sigma"],
            m_omega=meta["m_omega"],
        )
        return DKGSystemState(
            grid=grid,
            psi=arrays["psi"],
            kg=kg,
            couplings=Couplings(c["gamma_sigma"], c["gamma_omega"], c["fermion_mass"]),
            t=meta["t"],
        )
    if kind == "nld":
        c = meta["couplings"]
        return NLDState(
            grid=grid,
            psi=arrays["psi"],
            couplings=Couplings(c["gamma_sigma"], c["gamma_omega"], c["fermion_mass"]),
            t=meta["t"],
        )
    if kind == "density-matrix":
        return DensityMatrix(grid=grid, orbitals=arrays["orbitals"], occupations=arrays["occupations"])
    raise SnapshotError(f"unknown snapshot kind {kind!r} in {path}")


def save_reference_trajectory(path, fingerprint: str, times: np.ndarray, psi_samples: np.ndarray) -> None:
    """Persist a sampled spinor trajectory keyed by a config fingerprint."""
    write_snapshot(
        path,
        {"kind": "trajectory", "fingerprint": fingerprint},
        [("times", np.asarray(times, dtype=float)), ("psi_samples", psi_samples)],
    )


def load_reference_trajectory(path, fingerprint: str):
    """Load a trajectory snapshot; returns None on fingerprint mismatch."""
    meta, arrays = read_snapshot(path)
    if meta.get("kind") != "trajectory" or meta.get("fingerprint") != fingerprint:
        return None
    return arrays["times"], arrays["psi_samples"]
