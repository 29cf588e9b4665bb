"""
Field snapshot files and the on-disk trajectory store
"""
import base64
import json
import logging
import os

import msgpack
import numpy as np

from cmdnls.errors import ConfigError
from cmdnls.grid import SpectralField, make_grid

logger = logging.getLogger(__name__)

META_FILE = "meta.json"
INVARIANTS_FILE = "invariants.jsonl"
PACKED_FILE = "trajectory.msg"


def field_to_bytes(field):
    # little-endian (re, im) float64 pairs
    return field.values.astype("<c16").tobytes()


def field_from_bytes(grid, raw):
    return SpectralField(grid, np.frombuffer(raw, dtype="<c16"))


def snapshot_payload(field, time=0.0, encoding="base64"):
    raw = field_to_bytes(field)
    if encoding == "base64":
        data = base64.b64encode(raw).decode("ascii")
    elif encoding == "hex":
        data = raw.hex()
    else:
        raise ConfigError(f"unknown snapshot encoding {encoding!r}")
    return {
        "n_points": field.grid.n_points,
        "half_length": field.grid.half_length,
        "time": float(time),
        "encoding": encoding,
        "data": data,
    }


def field_from_payload(payload):
    grid = make_grid(payload["n_points"], payload["half_length"])
    encoding = payload.get("encoding", "base64")
    if encoding == "base64":
        raw = base64.b64decode(payload["data"])
    elif encoding == "hex":
        raw = bytes.fromhex(payload["data"])
    else:
        raise ConfigError(f"unknown snapshot encoding {encoding!r}")
    return field_from_bytes(grid, raw), float(payload.get("time", 0.0))


def write_snapshot(field, path, time=0.0, encoding="base64"):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(snapshot_payload(field, time, encoding), f)


def read_snapshot(path):
    """
    Reads a JSON snapshot and returns (field, time)
    """
    with open(path, "r", encoding="utf-8") as f:
        return field_from_payload(json.load(f))


def write_csv(field, path):
    table = np.column_stack([field.grid.x, field.values.real, field.values.imag])
    np.savetxt(path, table, fmt="%.17g", delimiter=",", header="x,re,im", comments="")


def read_csv(path):
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    grid = make_grid(table.shape[0], -table[0, 0])
    return SpectralField(grid, table[:, 1] + 1j * table[:, 2])


def _plain(value):
    # numpy scalars and complex numbers into JSON/msgpack friendly values
    if isinstance(value, dict):
        return {key: _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(item) for item in value]
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.generic):
        return value.item()
    return value


class TrajectoryStore:
    """
    Directory holding one trajectory: meta.json, invariants.jsonl, one JSON
    snapshot per stored time and a packed copy for fast reload
    """

    def __init__(self, path=None):
        self.path = None
        if path is not None:
            self.open(path)

    def open(self, path):
        self.path = path
        # Create the directory if it doesn't exist
        if not os.path.exists(path):
            os.makedirs(path)

    def close(self):
        if not self.path:
            raise ConfigError("trajectory store is not open")
        self.path = None

    def _require_open(self):
        if not self.path:
            raise ConfigError("trajectory store is not open")

    def save(self, record):
        """
        record (dict): grid, times, snapshots (SpectralField list), invariants (dict list),
        flags (dict) and optional config (dict)
        """
        self._require_open()
        grid = record["grid"]
        meta = {
            "n_points": grid.n_points,
            "half_length": grid.half_length,
            "n_times": len(record["times"]),
            "flags": _plain(record.get("flags", {})),
            "config": _plain(record.get("config", {})),
        }
        with open(os.path.join(self.path, META_FILE), "w", encoding="utf-8") as f:
            json.dump(meta, f, indent=2, sort_keys=True)

        with open(os.path.join(self.path, INVARIANTS_FILE), "w", encoding="utf-8") as f:
            for time, entry in zip(record["times"], record["invariants"]):
                f.write(json.dumps(_plain({"t": time, **entry}), sort_keys=True) + "\n")

        for i, (time, field) in enumerate(zip(record["times"], record["snapshots"])):
            write_snapshot(field, os.path.join(self.path, f"snap_{i:05d}.json"), time)

        packed = {
            "meta": meta,
            "times": [float(t) for t in record["times"]],
            "invariants": _plain(record["invariants"]),
            "snapshots": [field_to_bytes(field) for field in record["snapshots"]],
        }
        with open(os.path.join(self.path, PACKED_FILE), "wb") as f:
            f.write(msgpack.packb(packed, use_bin_type=True))
        logger.info("stored %d times in %s", len(record["times"]), self.path)

    def load(self):
        self._require_open()
        packed_path = os.path.join(self.path, PACKED_FILE)
        if not os.path.exists(packed_path):
            raise FileNotFoundError(f"no trajectory at {self.path}")
        with open(packed_path, "rb") as f:
            packed = msgpack.unpackb(f.read(), raw=False)
        meta = packed["meta"]
        grid = make_grid(meta["n_points"], meta["half_length"])
        return {
            "grid": grid,
            "times": list(packed["times"]),
            "invariants": packed["invariants"],
            "snapshots": [field_from_bytes(grid, raw) for raw in packed["snapshots"]],
            "flags": meta.get("flags", {}),
            "config": meta.get("config", {}),
        }
