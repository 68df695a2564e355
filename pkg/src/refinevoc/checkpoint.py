"""Checkpoint files: a JSON manifest followed by raw little-endian tensor blobs.

Layout::

    b"RVOCCKPT" | u32 version | u64 manifest length | manifest (UTF-8 JSON) | blobs

The manifest is written with sorted keys and every tensor is stored in a
fixed order, so ``save(load(path))`` reproduces ``path`` byte for byte.
Training never draws from torch's global generator (all randomness is
seeded per item), so no RNG state is stored and a resumed run writes the
same bytes as an uninterrupted one.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np
import torch

from .refiner_net import DiscriminatorConfig, GeneratorConfig
from .training import ModelState, OptimizerConfig, build_state

MAGIC = b"RVOCCKPT"
VERSION = 1

_DTYPES = {
    torch.float32: "<f4",
    torch.float64: "<f8",
    torch.int64: "<i8",
    torch.uint8: "|u1",
}
_TORCH_DTYPES = {v: k for k, v in _DTYPES.items()}


class CheckpointError(ValueError):
    pass


def _optimizer_payload(name: str, opt: torch.optim.Optimizer, tensors: list):
    sd = opt.state_dict()
    groups = []
    for group in sd["param_groups"]:
        groups.append({k: list(v) if isinstance(v, tuple) else v for k, v in group.items()})
    state_keys = {}
    for idx in sorted(sd["state"]):
        keys = sorted(sd["state"][idx])
        state_keys[str(idx)] = keys
        for key in keys:
            value = sd["state"][idx][key]
            if not torch.is_tensor(value):
                value = torch.tensor(value)
            tensors.append((f"{name}/state/{idx}/{key}", value))
    return {"param_groups": groups, "state_keys": state_keys}


def save_checkpoint(path, state: ModelState, extra: dict | None = None) -> None:
    tensors: list[tuple[str, torch.Tensor]] = []
    for name, value in state.generator.state_dict().items():
        tensors.append((f"generator/{name}", value))
    for name, value in state.discriminators.state_dict().items():
        tensors.append((f"discriminators/{name}", value))
    optimizers = {
        "opt_g": _optimizer_payload("opt_g", state.opt_g, tensors),
        "opt_d": _optimizer_payload("opt_d", state.opt_d, tensors),
    }

    index, blobs, offset = [], [], 0
    for name, tensor in tensors:
        tensor = tensor.detach().cpu().contiguous()
        if tensor.dtype not in _DTYPES:
            raise CheckpointError(f"cannot store {name} with dtype {tensor.dtype}")
        raw = tensor.numpy().astype(_DTYPES[tensor.dtype], copy=False).tobytes()
        index.append({"name": name, "dtype": _DTYPES[tensor.dtype], "shape": list(tensor.shape),
                      "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)

    manifest = {
        "format": "refinevoc-checkpoint",
        "version": VERSION,
        "step": state.step,
        "seed": state.seed,
        "dtype": str(next(state.generator.parameters()).dtype).replace("torch.", ""),
        "generator": asdict(state.gen_cfg),
        "discriminator": asdict(state.disc_cfg),
        "optimizer": asdict(state.optim_cfg),
        "optimizers": optimizers,
        "extra": extra or {},
        "tensors": index,
    }
    head = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode()
    payload = MAGIC + struct.pack("<IQ", VERSION, len(head)) + head + b"".join(blobs)
    Path(path).write_bytes(payload)


def read_manifest(path) -> tuple[dict, bytes]:
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + 12 or not data.startswith(MAGIC):
        raise CheckpointError(f"{path}: not a refinevoc checkpoint")
    version, size = struct.unpack_from("<IQ", data, len(MAGIC))
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    start = len(MAGIC) + 12
    try:
        manifest = json.loads(data[start:start + size].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt manifest ({exc})") from exc
    blob = data[start + size:]
    expected = sum(t["nbytes"] for t in manifest.get("tensors", []))
    if len(blob) != expected:
        raise CheckpointError(f"{path}: expected {expected} bytes of tensor data, found {len(blob)}")
    return manifest, blob


def _tuples(d: dict) -> dict:
    return {k: tuple(tuple(x) if isinstance(x, list) else x for x in v) if isinstance(v, list) else v
            for k, v in d.items()}


def load_checkpoint(path) -> tuple[ModelState, dict]:
    """Rebuild the full training state. Returns ``(state, extra)``."""
    manifest, blob = read_manifest(path)
    tensors = {}
    for entry in manifest["tensors"]:
        arr = np.frombuffer(blob, dtype=entry["dtype"], count=int(np.prod(entry["shape"], dtype=np.int64)),
                            offset=entry["offset"]).reshape(entry["shape"])
        tensors[entry["name"]] = torch.from_numpy(arr.copy())

    try:
        gen_cfg = GeneratorConfig(**_tuples(manifest["generator"]))
        disc_cfg = DiscriminatorConfig(**_tuples(manifest["discriminator"]))
        optim_cfg = OptimizerConfig(**_tuples(manifest["optimizer"]))
    except (TypeError, ValueError, KeyError) as exc:
        raise CheckpointError(f"{path}: invalid model configuration ({exc})") from exc
    dtype = getattr(torch, manifest["dtype"])
    state = build_state(gen_cfg, disc_cfg, optim_cfg, manifest["seed"], dtype)

    def subset(prefix):
        return {k[len(prefix) + 1:]: v for k, v in tensors.items() if k.startswith(prefix + "/")}

    try:
        state.generator.load_state_dict(subset("generator"))
        state.discriminators.load_state_dict(subset("discriminators"))
    except RuntimeError as exc:
        raise CheckpointError(f"{path}: parameters do not match the stored configuration ({exc})") from exc
    for name, opt in (("opt_g", state.opt_g), ("opt_d", state.opt_d)):
        payload = manifest["optimizers"][name]
        groups = [{k: tuple(v) if k == "betas" else v for k, v in g.items()} for g in payload["param_groups"]]
        opt_state = {
            int(idx): {key: tensors[f"{name}/state/{idx}/{key}"] for key in keys}
            for idx, keys in payload["state_keys"].items()
        }
        opt.load_state_dict({"state": opt_state, "param_groups": groups})
    state.step = manifest["step"]
    return state, manifest.get("extra", {})
