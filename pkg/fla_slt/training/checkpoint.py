"""Checkpoint directory format.

A checkpoint is a directory holding ``manifest.json`` and one blob per component group. A blob is the magic
``FLASLT01``, a little-endian uint64 header length, a JSON header describing every tensor (name, shape, dtype,
byte order, offset) and the raw little-endian tensor bytes. The manifest lists the groups with the SHA-256 of
their blob, the config hash, the training state and a digest over its own content.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np
import torch
from torch import nn
from torch.optim import Optimizer

from fla_slt.common.constants import BLOB_MAGIC, BLOB_SUFFIX, MANIFEST_FILE_NAME
from fla_slt.common.exceptions import CheckpointError, ConfigHashMismatchError, ManifestTamperedError
from fla_slt.common.logger import LoggerFactory

LOG = LoggerFactory.get_logger(__name__)

FORMAT_VERSION = 1
OPTIMIZER_GROUP = "optimizer"
RNG_GROUP = "rng"
_LENGTH_DTYPE = np.dtype("<u8")


@dataclass
class TrainState:
    stage: str = "stage1"
    step: int = 0
    epoch: int = 0
    best_dev_bleu: float = -1.0
    best_epoch: int = -1
    rng_state: Optional[torch.Tensor] = None

    def to_manifest(self) -> Dict[str, Any]:
        data = asdict(self)
        data.pop("rng_state")
        return data


def _canonical(data: Dict[str, Any]) -> bytes:
    return json.dumps(data, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _digest(data: Dict[str, Any]) -> str:
    return hashlib.sha256(_canonical({key: value for key, value in data.items() if key != "digest"})).hexdigest()


def write_blob(path: Path, tensors: Dict[str, torch.Tensor], meta: Optional[Dict[str, Any]] = None) -> str:
    """Write tensors in name order and return the SHA-256 of the file."""
    entries: List[Dict[str, Any]] = []
    payloads: List[bytes] = []
    offset = 0
    for name in sorted(tensors):
        array = tensors[name].detach().cpu().contiguous().numpy()
        array = array.astype(array.dtype.newbyteorder("<"), copy=False)
        payload = array.tobytes()
        entries.append(
            {
                "name": name,
                "shape": list(array.shape),
                "dtype": array.dtype.name,
                "byte_order": "little",
                "offset": offset,
                "nbytes": len(payload),
            }
        )
        payloads.append(payload)
        offset += len(payload)
    header = _canonical({"tensors": entries, "meta": meta or {}})
    content = BLOB_MAGIC + np.array([len(header)], dtype=_LENGTH_DTYPE).tobytes() + header + b"".join(payloads)
    path.write_bytes(content)
    return hashlib.sha256(content).hexdigest()


def read_blob(path: Path) -> Tuple[Dict[str, torch.Tensor], Dict[str, Any]]:
    try:
        content = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint blob {path}: {e}") from e
    if content[: len(BLOB_MAGIC)] != BLOB_MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint blob")
    start = len(BLOB_MAGIC) + _LENGTH_DTYPE.itemsize
    header_length = int(np.frombuffer(content[len(BLOB_MAGIC) : start], dtype=_LENGTH_DTYPE)[0])
    header = json.loads(content[start : start + header_length].decode("utf-8"))
    data_start = start + header_length
    tensors: Dict[str, torch.Tensor] = {}
    for entry in header["tensors"]:
        dtype = np.dtype(entry["dtype"]).newbyteorder("<")
        begin = data_start + entry["offset"]
        array = np.frombuffer(content[begin : begin + entry["nbytes"]], dtype=dtype).reshape(entry["shape"])
        tensors[entry["name"]] = torch.from_numpy(array.astype(array.dtype.newbyteorder("="), copy=True))
    return tensors, header["meta"]


def optimizer_tensors(optimizer: Optimizer) -> Tuple[Dict[str, torch.Tensor], Dict[str, Any]]:
    state_dict = optimizer.state_dict()
    tensors: Dict[str, torch.Tensor] = {}
    scalars: Dict[str, Dict[str, Any]] = {}
    for parameter_id, entries in state_dict["state"].items():
        for key, value in entries.items():
            if torch.is_tensor(value):
                tensors[f"state.{parameter_id}.{key}"] = value
            else:
                scalars.setdefault(str(parameter_id), {})[key] = value
    return tensors, {"param_groups": state_dict["param_groups"], "scalars": scalars}


def restore_optimizer(optimizer: Optimizer, tensors: Dict[str, torch.Tensor], meta: Dict[str, Any]) -> None:
    state: Dict[int, Dict[str, Any]] = {}
    for name, tensor in tensors.items():
        _, parameter_id, key = name.split(".", 2)
        state.setdefault(int(parameter_id), {})[key] = tensor
    for parameter_id, entries in meta["scalars"].items():
        state.setdefault(int(parameter_id), {}).update(entries)
    optimizer.load_state_dict({"state": state, "param_groups": meta["param_groups"]})


def save_checkpoint(
    path: Path,
    groups: Dict[str, nn.Module],
    state: TrainState,
    config_hash: str,
    optimizer: Optional[Optimizer] = None,
) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    blobs: Dict[str, Dict[str, str]] = {}
    for name, module in groups.items():
        file_name = name + BLOB_SUFFIX
        blobs[name] = {"file": file_name, "sha256": write_blob(path / file_name, dict(module.state_dict()))}
    if optimizer is not None:
        tensors, meta = optimizer_tensors(optimizer)
        file_name = OPTIMIZER_GROUP + BLOB_SUFFIX
        blobs[OPTIMIZER_GROUP] = {"file": file_name, "sha256": write_blob(path / file_name, tensors, meta)}
    if state.rng_state is not None:
        file_name = RNG_GROUP + BLOB_SUFFIX
        blobs[RNG_GROUP] = {"file": file_name, "sha256": write_blob(path / file_name, {"torch": state.rng_state})}
    manifest: Dict[str, Any] = {
        "format_version": FORMAT_VERSION,
        "config_hash": config_hash,
        "components": list(groups),
        "blobs": blobs,
        "state": state.to_manifest(),
    }
    manifest["digest"] = _digest(manifest)
    with open(path / MANIFEST_FILE_NAME, "w", encoding="utf-8") as manifest_file:
        json.dump(manifest, manifest_file, sort_keys=True, indent=2)
        manifest_file.write("\n")
    LOG.info(f"wrote checkpoint {path} (step {state.step}, groups {', '.join(blobs)})")
    return path


def read_manifest(path: Path) -> Dict[str, Any]:
    manifest_path = path / MANIFEST_FILE_NAME
    if not manifest_path.is_file():
        raise CheckpointError(f"no checkpoint at {path}: {MANIFEST_FILE_NAME} missing")
    try:
        with open(manifest_path, "r", encoding="utf-8") as manifest_file:
            manifest: Dict[str, Any] = json.load(manifest_file)
    except json.JSONDecodeError as e:
        raise ManifestTamperedError(f"{manifest_path} is not valid JSON: {e}") from e
    if manifest.get("digest") != _digest(manifest):
        raise ManifestTamperedError(f"{manifest_path} does not match its digest")
    return manifest


def _checked_blob(path: Path, manifest: Dict[str, Any], group: str) -> Tuple[Dict[str, torch.Tensor], Dict[str, Any]]:
    entry = manifest["blobs"][group]
    blob_path = path / entry["file"]
    if not blob_path.is_file():
        raise CheckpointError(f"checkpoint {path} misses the blob of group '{group}'")
    if hashlib.sha256(blob_path.read_bytes()).hexdigest() != entry["sha256"]:
        raise ManifestTamperedError(f"blob of group '{group}' in {path} does not match the manifest")
    return read_blob(blob_path)


def check_config_hash(manifest: Dict[str, Any], config_hash: Optional[str], force: bool, path: Path) -> None:
    if config_hash is None or manifest["config_hash"] == config_hash:
        return
    written = manifest["config_hash"][:12]
    message = f"checkpoint {path} was written under config {written}, current config is {config_hash[:12]}"
    if not force:
        raise ConfigHashMismatchError(message)
    LOG.warning(message + " (forced)")


def load_checkpoint(
    path: Path,
    groups: Dict[str, nn.Module],
    optimizer: Optional[Optimizer] = None,
    only: Optional[Iterable[str]] = None,
    config_hash: Optional[str] = None,
    force: bool = False,
) -> TrainState:
    """Load the named component groups (all of ``groups`` unless ``only`` is given) into their modules."""
    manifest = read_manifest(path)
    check_config_hash(manifest, config_hash, force, path)
    wanted = list(groups) if only is None else list(only)
    for name in wanted:
        if name not in groups:
            raise CheckpointError(f"model has no component group '{name}'")
        if name not in manifest["components"]:
            raise CheckpointError(f"checkpoint {path} has no group '{name}', it holds {manifest['components']}")
        tensors, _ = _checked_blob(path, manifest, name)
        try:
            groups[name].load_state_dict(tensors)
        except RuntimeError as e:
            raise CheckpointError(f"group '{name}' of {path} does not fit the model: {e}") from e
    if optimizer is not None:
        if OPTIMIZER_GROUP not in manifest["blobs"]:
            raise CheckpointError(f"checkpoint {path} holds no optimizer state")
        restore_optimizer(optimizer, *_checked_blob(path, manifest, OPTIMIZER_GROUP))
    state = TrainState(**manifest["state"])
    if RNG_GROUP in manifest["blobs"]:
        state.rng_state = _checked_blob(path, manifest, RNG_GROUP)[0]["torch"]
    LOG.info(f"loaded checkpoint {path} groups {', '.join(wanted)} at step {state.step}")
    return state
