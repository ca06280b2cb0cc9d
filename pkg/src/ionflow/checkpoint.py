"""Checkpoint container: bit-exact save/restore of a running simulation.

Layout: an 8-byte little-endian header length, a UTF-8 JSON header, then the
raw field payload.  Arrays are little-endian 64-bit floats serialized in
axis-major (C) order, ghost layers included, so a restored run replays the
exact trajectory.  Scalar accumulators ride in the header; JSON float
round-tripping is exact for finite doubles.  The payload carries a 64-bit
content checksum (blake2b-8) verified on load.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

from .errors import ConfigError, InvariantViolation

FORMAT_NAME = "ionflow-checkpoint"
FORMAT_VERSION = 1


def _checksum(payload):
    return hashlib.blake2b(payload, digest_size=8).hexdigest()


def save_checkpoint(path, config_echo, state, accumulators, extra_arrays=None):
    """Write a checkpoint; `accumulators` is a flat JSON-safe dict."""
    arrays = []
    blobs = []

    def add(name, arr):
        a = np.ascontiguousarray(arr, dtype="<f8")
        arrays.append({"name": name, "shape": list(a.shape)})
        blobs.append(a.tobytes(order="C"))

    for i, c in enumerate(state.concentrations):
        add("c%d" % (i + 1), c.data)
    add("phi", state.potential.data)
    for a, comp in enumerate(state.velocity.components):
        add("u%d" % a, comp)
    add("p", state.pressure.data)
    for name, arr in (extra_arrays or {}).items():
        add(name, arr)
    payload = b"".join(blobs)
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "config": config_echo,
        "step": state.step,
        "t": state.t,
        "accumulators": accumulators,
        "arrays": arrays,
        "checksum": _checksum(payload),
    }
    head = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(head)))
        fh.write(head)
        fh.write(payload)


def load_checkpoint(path):
    """Read a checkpoint; returns (header dict, {name: ndarray})."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8:
        raise ConfigError("checkpoint %s is truncated" % path)
    (hlen,) = struct.unpack("<Q", raw[:8])
    try:
        header = json.loads(raw[8:8 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ConfigError("checkpoint %s has a corrupt header: %s" % (path, e)) from e
    if header.get("format") != FORMAT_NAME:
        raise ConfigError("not a checkpoint file: %s" % path)
    if header.get("version") != FORMAT_VERSION:
        raise ConfigError("unsupported checkpoint version %r" % header.get("version"))
    payload = raw[8 + hlen:]
    if _checksum(payload) != header["checksum"]:
        raise InvariantViolation("checkpoint %s failed its content checksum" % path)
    arrays = {}
    offset = 0
    for meta in header["arrays"]:
        shape = tuple(meta["shape"])
        nbytes = 8 * int(np.prod(shape))
        arrays[meta["name"]] = np.frombuffer(
            payload[offset:offset + nbytes], dtype="<f8").reshape(shape).copy()
        offset += nbytes
    if offset != len(payload):
        raise ConfigError("checkpoint %s payload size mismatch" % path)
    return header, arrays
