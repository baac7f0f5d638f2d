"""Checkpoint archive: a zip holding a manifest and raw parameter buffers.

Layout:
    manifest.json   format version, variant, class names, model config,
                    config hash, dtype, and the shape of every parameter
    params/<name>.bin   little-endian raw bytes of each parameter tensor

Loading rebuilds the model from the manifest and copies parameters in,
checking every name and shape, so a checkpoint is self-describing and a
mismatched config cannot load silently.
"""

from __future__ import annotations

import json
import os
import zipfile

import numpy as np
import torch

from .config import ModelConfig, config_hash
from .errors import ConfigError
from .transeger import build_model

FORMAT = "svtas-checkpoint-v1"

_DTYPES = {"float32": torch.float32, "float64": torch.float64}


def _dtype_name(model) -> str:
    for name, dt in _DTYPES.items():
        if model.dtype == dt:
            return name
    raise ConfigError(f"cannot checkpoint model with dtype {model.dtype}")


def save_checkpoint(path, model, variant: str) -> None:
    """Write the model's weights and identity to a fresh archive at path."""
    params = dict(model.named_parameters())
    manifest = {
        "format": FORMAT,
        "variant": variant,
        "class_names": list(model.class_names),
        "config": model.config.to_dict(),
        "config_hash": config_hash(model.config),
        "dtype": _dtype_name(model),
        "params": {name: list(p.shape) for name, p in params.items()},
    }
    out_dir = os.path.dirname(os.path.abspath(path))
    os.makedirs(out_dir, exist_ok=True)
    with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("manifest.json", json.dumps(manifest, indent=2, sort_keys=True))
        for name, p in params.items():
            arr = p.detach().numpy()
            zf.writestr(f"params/{name}.bin", arr.astype(arr.dtype.newbyteorder("<"),
                                                         copy=False).tobytes())


def read_manifest(path) -> dict:
    """Return the archive's manifest without instantiating a model."""
    try:
        with zipfile.ZipFile(path) as zf:
            raw = zf.read("manifest.json")
    except (OSError, zipfile.BadZipFile, KeyError) as e:
        raise ConfigError(f"cannot read checkpoint {path}: {e}") from e
    try:
        manifest = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ConfigError(f"checkpoint {path} has a corrupt manifest: {e}") from e
    if manifest.get("format") != FORMAT:
        raise ConfigError(
            f"checkpoint {path} has format {manifest.get('format')!r}, expected {FORMAT!r}")
    return manifest


def load_checkpoint(path, seed: int = 0):
    """Rebuild the model a checkpoint describes and restore its weights.

    Returns (model, manifest). Any missing, extra, or misshapen parameter
    raises ConfigError rather than loading partially.
    """
    manifest = read_manifest(path)
    for key in ("variant", "class_names", "config", "dtype", "params"):
        if key not in manifest:
            raise ConfigError(f"checkpoint {path} manifest lacks {key!r}")
    if manifest["dtype"] not in _DTYPES:
        raise ConfigError(f"checkpoint {path} has unsupported dtype {manifest['dtype']!r}")
    config = ModelConfig.from_dict(manifest["config"])
    model = build_model(manifest["variant"], config, manifest["class_names"],
                        dtype=_DTYPES[manifest["dtype"]], seed=seed)
    params = dict(model.named_parameters())
    want = set(params)
    have = set(manifest["params"])
    if want != have:
        missing = sorted(want - have)
        extra = sorted(have - want)
        raise ConfigError(
            f"checkpoint {path} parameter names do not match the model "
            f"(missing {missing}, extra {extra})")
    np_dtype = np.dtype(manifest["dtype"]).newbyteorder("<")
    with zipfile.ZipFile(path) as zf:
        for name, p in params.items():
            shape = tuple(manifest["params"][name])
            if shape != tuple(p.shape):
                raise ConfigError(
                    f"checkpoint {path} parameter {name} has shape {shape}, "
                    f"model expects {tuple(p.shape)}")
            try:
                raw = zf.read(f"params/{name}.bin")
            except KeyError as e:
                raise ConfigError(f"checkpoint {path} lacks data for {name}") from e
            arr = np.frombuffer(raw, dtype=np_dtype)
            if arr.size != p.numel():
                raise ConfigError(
                    f"checkpoint {path} parameter {name} holds {arr.size} values, "
                    f"model expects {p.numel()}")
            with torch.no_grad():
                p.copy_(torch.from_numpy(arr.reshape(shape).copy()))
    return model, manifest
