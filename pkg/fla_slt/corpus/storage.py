from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, List

import numpy as np
from PIL import Image

from fla_slt.common.constants import FRAME_FILE_FORMAT, FRAMES_DIRECTORY_NAME, MANIFEST_FILE_NAME, Splits
from fla_slt.common.exceptions import CorpusFormatError, MissingFrameError
from fla_slt.common.logger import LoggerFactory
from fla_slt.corpus.sign_video import Corpus, SignVideo

LOG = LoggerFactory.get_logger(__name__)

MANIFEST_FORMAT_VERSION = 1


def frame_path(root: Path, sample_id: str, index: int) -> Path:
    return root / FRAMES_DIRECTORY_NAME / sample_id / FRAME_FILE_FORMAT.format(index=index)


def _to_png_array(frame: np.ndarray) -> np.ndarray:
    """(3, H, W) float in [0, 1] -> (H, W, 3) uint8."""
    return np.clip(np.rint(np.transpose(frame, (1, 2, 0)) * 255.0), 0, 255).astype(np.uint8)


def save_corpus(corpus: Corpus, root: Path, config_hash: str = "") -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    entries: List[Dict[str, Any]] = []
    for split_name in Splits.names():
        for sample in corpus.splits.get(split_name, []):
            sample_directory = root / FRAMES_DIRECTORY_NAME / sample.sample_id
            sample_directory.mkdir(parents=True, exist_ok=True)
            for index, frame in enumerate(sample.frames):
                Image.fromarray(_to_png_array(frame)).save(frame_path(root, sample.sample_id, index))
            entries.append(
                {
                    "sample_id": sample.sample_id,
                    "split": split_name,
                    "transcript": sample.transcript,
                    "frame_count": sample.frame_count,
                }
            )
    manifest = {"format_version": MANIFEST_FORMAT_VERSION, "config_hash": config_hash, "samples": entries}
    with open(root / MANIFEST_FILE_NAME, "w", encoding="utf-8") as manifest_file:
        json.dump(manifest, manifest_file, indent=2, sort_keys=True)
    LOG.info(f"saved {len(entries)} samples to {root}")
    return root


def _read_manifest(root: Path) -> List[Dict[str, Any]]:
    manifest_path = root / MANIFEST_FILE_NAME
    if not manifest_path.is_file():
        raise CorpusFormatError(f"no {MANIFEST_FILE_NAME} in {root}")
    with open(manifest_path, "r", encoding="utf-8") as manifest_file:
        manifest = json.load(manifest_file)
    entries = manifest["samples"] if isinstance(manifest, dict) else manifest
    if not isinstance(entries, list):
        raise CorpusFormatError(f"{manifest_path} does not list samples")
    return entries


def _load_sample(root: Path, entry: Dict[str, Any]) -> SignVideo:
    sample_id = entry.get("sample_id", "<missing sample_id>")
    for key in ("sample_id", "split", "transcript", "frame_count"):
        if key not in entry:
            raise CorpusFormatError(f"manifest entry {sample_id} lacks '{key}'")
    frames: List[np.ndarray] = []
    for index in range(int(entry["frame_count"])):
        path = frame_path(root, sample_id, index)
        if not path.is_file():
            raise MissingFrameError(f"sample {sample_id}: frame file {path} is missing", sample_id=sample_id)
        with Image.open(path) as image:
            pixels = np.asarray(image.convert("RGB"), dtype=np.float32) / 255.0
        frames.append(np.transpose(pixels, (2, 0, 1)))
    if not frames:
        raise CorpusFormatError(f"sample {sample_id} has no frames")
    if len({frame.shape for frame in frames}) != 1:
        raise CorpusFormatError(f"sample {sample_id} has frames of different sizes")
    return SignVideo(frames=np.stack(frames), transcript=entry["transcript"], sample_id=sample_id)


def load_corpus(root: Path) -> Corpus:
    root = Path(root)
    corpus = Corpus()
    for entry in _read_manifest(root):
        split_name = entry.get("split")
        if split_name not in corpus.splits:
            raise CorpusFormatError(f"sample {entry.get('sample_id')} has unknown split {split_name!r}")
        corpus.splits[split_name].append(_load_sample(root, entry))
    LOG.info(f"loaded {len(corpus)} samples from {root}")
    return corpus
