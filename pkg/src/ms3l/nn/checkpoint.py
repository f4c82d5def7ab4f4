"""Checkpoint format: JSON manifest plus a flat little-endian weight blob.

Layout: magic b"MS3LCKPT", u16 version, u32 manifest length, manifest JSON,
then every tensor's raw bytes at the offsets the manifest declares. Weights
round-trip bit-exactly.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .model import Network, NetworkParams

MAGIC = b"MS3LCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, network: Network, extra: dict | None = None) -> None:
    params = network.param_dict()
    dtype = np.dtype(network.cfg.dtype).newbyteorder("<")
    layers = []
    offset = 0
    blobs = []
    for name, arr in params.items():   # insertion order is canonical
        raw = np.ascontiguousarray(arr, dtype=dtype).tobytes()
        layers.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += len(raw)
        blobs.append(raw)
    manifest = {
        "config": {
            "image_size": network.cfg.image_size,
            "in_channels": network.cfg.in_channels,
            "conv_channels": list(network.cfg.conv_channels),
            "dtype": network.cfg.dtype,
            "single_pool": network.cfg.single_pool,
        },
        "layers": layers,
        "blob_bytes": offset,
        "extra": extra or {},
    }
    mbytes = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", VERSION, len(mbytes)))
        fh.write(mbytes)
        for raw in blobs:
            fh.write(raw)


def load_checkpoint(path) -> tuple[NetworkParams, dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(MAGIC[:min(len(data), len(MAGIC))]) or len(data) < len(MAGIC):
        raise CheckpointError("not a checkpoint file (bad magic)")
    if len(data) < len(MAGIC) + 6:
        raise CheckpointError("unexpected end of file in header")
    version, mlen = struct.unpack_from("<HI", data, len(MAGIC))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    head = len(MAGIC) + 6
    if head + mlen > len(data):
        raise CheckpointError("unexpected end of file in manifest")
    manifest = json.loads(data[head:head + mlen].decode("utf-8"))
    cfg = NetworkParams(
        image_size=manifest["config"]["image_size"],
        in_channels=manifest["config"]["in_channels"],
        conv_channels=tuple(manifest["config"]["conv_channels"]),
        dtype=manifest["config"]["dtype"],
        single_pool=manifest["config"].get("single_pool", False),
    )
    dtype = np.dtype(cfg.dtype).newbyteorder("<")
    blob = data[head + mlen:]
    if len(blob) != manifest["blob_bytes"]:
        raise CheckpointError("unexpected end of file in weight blob")
    params = {}
    for entry in manifest["layers"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + count * dtype.itemsize
        if end > len(blob):
            raise CheckpointError(f"tensor {entry['name']} overruns the blob")
        arr = np.frombuffer(blob[start:end], dtype=dtype).reshape(shape)
        params[entry["name"]] = arr.astype(np.dtype(cfg.dtype))
    return cfg, params, manifest.get("extra", {})


def network_from_checkpoint(path, rng=None) -> Network:
    cfg, params, _ = load_checkpoint(path)
    rng = rng or np.random.default_rng(0)
    net = Network(cfg, rng)
    net.load_param_dict(params)
    return net
