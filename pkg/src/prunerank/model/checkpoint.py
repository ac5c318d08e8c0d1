"""Checkpoint format: one JSON header line, then raw float32 tensor data.

The header carries {format_version, model_config, manifest}; each manifest
entry is {name, shape, offset} with the byte offset into the data section.
Tensors are serialized little-endian in manifest order, which makes the file
bit-exact across platforms for identical parameters.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .config import ModelConfig
from .network import Params, param_shapes

FORMAT_VERSION = 1


def save_checkpoint(path: str | Path, params: Params, cfg: ModelConfig) -> None:
    manifest = []
    blobs = []
    offset = 0
    for name, shape in param_shapes(cfg):
        tensor = params[name]
        if tuple(tensor.shape) != shape:
            raise ValueError(f"tensor {name} has shape {tensor.shape}, expected {shape}")
        blob = np.ascontiguousarray(tensor, dtype="<f4").tobytes()
        manifest.append({"name": name, "shape": list(shape), "offset": offset})
        blobs.append(blob)
        offset += len(blob)
    header = {
        "format_version": FORMAT_VERSION,
        "model_config": cfg.to_dict(),
        "manifest": manifest,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, ensure_ascii=False, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path: str | Path) -> tuple[Params, ModelConfig]:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        data = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"{path}: not a checkpoint (bad header)") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format_version {header.get('format_version')}")
    cfg = ModelConfig.from_dict(header["model_config"])
    params: Params = {}
    for entry in header["manifest"]:
        shape = tuple(int(s) for s in entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = int(entry["offset"])
        end = start + 4 * count
        if end > len(data):
            raise ValueError(f"{path}: truncated tensor data for {entry['name']}")
        tensor = np.frombuffer(data[start:end], dtype="<f4").reshape(shape)
        params[entry["name"]] = tensor.astype(np.float64)
    expected = {name for name, _ in param_shapes(cfg)}
    if set(params) != expected:
        raise ValueError(f"{path}: manifest does not match the model config")
    return params, cfg
