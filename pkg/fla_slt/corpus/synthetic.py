"""Deterministic synthetic sign-video corpus.

Every glyph is a seeded binary pattern; a sample renders its glyph sequence frame by frame, each glyph held for
``frames_per_glyph`` frames and shifted by a seeded integer jitter per frame. The transcript is the glyph-name
sequence itself, so a perfect translator reproduces it exactly.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from fla_slt.common.config import Config
from fla_slt.common.constants import Splits
from fla_slt.common.exceptions import ConfigValidationError
from fla_slt.common.logger import LoggerFactory
from fla_slt.corpus.sign_video import Corpus, SignVideo
from fla_slt.corpus.vocabulary import Vocabulary

LOG = LoggerFactory.get_logger(__name__)

PATTERN_GRID = 8
_PATTERN_STREAM = 0
_GRAMMAR_STREAM = 1
_SAMPLE_STREAM = 2
_MONOLINGUAL_STREAM = 3


@dataclass(frozen=True)
class SyntheticSpec:
    glyph_vocab_size: int = 30
    sentence_length_range: Tuple[int, int] = (3, 8)
    frames_per_glyph: int = 4
    jitter: int = 2
    image_size: Tuple[int, int] = (32, 32)
    counts: Tuple[int, int, int] = (2000, 200, 200)
    seed: int = 7
    successors_per_glyph: int = 30

    def __post_init__(self) -> None:
        minimum, maximum = self.sentence_length_range
        checks = [
            ("glyph_vocab_size", self.glyph_vocab_size >= 1),
            ("sentence_length_range", 1 <= minimum <= maximum),
            ("frames_per_glyph", self.frames_per_glyph >= 1),
            ("jitter", self.jitter >= 0),
            ("image_size", len(self.image_size) == 2 and min(self.image_size) >= PATTERN_GRID),
            ("counts", len(self.counts) == 3 and all(count >= 1 for count in self.counts)),
            ("successors_per_glyph", self.successors_per_glyph >= 1),
        ]
        for field_name, valid in checks:
            if not valid:
                raise ConfigValidationError(f"invalid synthetic corpus spec field '{field_name}': {asdict(self)}")

    @classmethod
    def from_config(cls, config: Config) -> SyntheticSpec:
        return cls(
            glyph_vocab_size=config.glyph_vocab_size,
            sentence_length_range=(config.sentence_length_range[0], config.sentence_length_range[1]),
            frames_per_glyph=config.frames_per_glyph,
            jitter=config.jitter,
            image_size=(config.image_size[0], config.image_size[1]),
            counts=(config.counts[0], config.counts[1], config.counts[2]),
            seed=config.seed,
            successors_per_glyph=config.successors_per_glyph,
        )

    @property
    def glyph_names(self) -> List[str]:
        width = len(str(self.glyph_vocab_size - 1))
        return [f"g{index:0{width}d}" for index in range(self.glyph_vocab_size)]


def glyph_patterns(spec: SyntheticSpec) -> np.ndarray:
    """One distinct binary (H, W) pattern per glyph, shape (G, H, W)."""
    rng = np.random.default_rng([spec.seed, _PATTERN_STREAM])
    height, width = spec.image_size
    patterns: List[np.ndarray] = []
    seen = set()
    while len(patterns) < spec.glyph_vocab_size:
        cells = (rng.random((PATTERN_GRID, PATTERN_GRID)) < 0.5).astype(np.float32)
        key = cells.tobytes()
        if key in seen or not cells.any():
            continue
        seen.add(key)
        cell_height, cell_width = -(-height // PATTERN_GRID), -(-width // PATTERN_GRID)
        patterns.append(np.kron(cells, np.ones((cell_height, cell_width), dtype=np.float32))[:height, :width])
    return np.stack(patterns)


def glyph_successors(spec: SyntheticSpec) -> List[np.ndarray]:
    rng = np.random.default_rng([spec.seed, _GRAMMAR_STREAM])
    count = min(spec.successors_per_glyph, spec.glyph_vocab_size)
    return [
        np.sort(rng.choice(spec.glyph_vocab_size, size=count, replace=False)) for _ in range(spec.glyph_vocab_size)
    ]


def sample_glyph_sequence(
    spec: SyntheticSpec, successors: Sequence[np.ndarray], rng: np.random.Generator
) -> List[int]:
    minimum, maximum = spec.sentence_length_range
    length = int(rng.integers(minimum, maximum + 1))
    sequence = [int(rng.integers(spec.glyph_vocab_size))]
    while len(sequence) < length:
        sequence.append(int(rng.choice(successors[sequence[-1]])))
    return sequence


def shift_image(image: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """Integer translation with zero fill."""
    shifted = np.zeros_like(image)
    height, width = image.shape[-2:]
    source_y = slice(max(0, -dy), min(height, height - dy))
    source_x = slice(max(0, -dx), min(width, width - dx))
    target_y = slice(max(0, dy), min(height, height + dy))
    target_x = slice(max(0, dx), min(width, width + dx))
    shifted[..., target_y, target_x] = image[..., source_y, source_x]
    return shifted


def render_sample(
    spec: SyntheticSpec,
    patterns: np.ndarray,
    successors: Sequence[np.ndarray],
    split_index: int,
    sample_index: int,
    sample_id: str,
) -> SignVideo:
    rng = np.random.default_rng([spec.seed, _SAMPLE_STREAM, split_index, sample_index])
    glyphs = sample_glyph_sequence(spec, successors, rng)
    frames: List[np.ndarray] = []
    for glyph in glyphs:
        for _ in range(spec.frames_per_glyph):
            dy, dx = (int(value) for value in rng.integers(-spec.jitter, spec.jitter + 1, size=2))
            frames.append(shift_image(patterns[glyph], dy, dx))
    video = np.repeat(np.stack(frames)[:, None, :, :], 3, axis=1).astype(np.float32)
    names = spec.glyph_names
    return SignVideo(frames=video, transcript=" ".join(names[glyph] for glyph in glyphs), sample_id=sample_id)


def generate_synthetic_corpus(spec: SyntheticSpec, workers: int = 1) -> Corpus:
    patterns = glyph_patterns(spec)
    successors = glyph_successors(spec)
    corpus = Corpus()
    jobs: List[Tuple[str, int, int]] = []
    for split_name, count in zip(Splits.names(), spec.counts):
        split_index = Splits.names().index(split_name)
        jobs.extend((split_name, split_index, index) for index in range(count))

    def _render(job: Tuple[str, int, int]) -> SignVideo:
        split_name, split_index, index = job
        return render_sample(spec, patterns, successors, split_index, index, f"{split_name}_{index:05d}")

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            samples = list(executor.map(_render, jobs))
    else:
        samples = [_render(job) for job in jobs]
    for (split_name, _, _), sample in zip(jobs, samples):
        corpus.splits[split_name].append(sample)
    LOG.info(
        "generated synthetic corpus: "
        + ", ".join(f"{name}={len(corpus.splits[name])}" for name in Splits.names())
        + f" (seed {spec.seed})"
    )
    return corpus


def generate_monolingual_sentences(spec: SyntheticSpec, count: int, seed: Optional[int] = None) -> List[str]:
    """Text-only sentences from the corpus grammar, for denoising pretraining of a backend."""
    successors = glyph_successors(spec)
    rng = np.random.default_rng([spec.seed if seed is None else seed, _MONOLINGUAL_STREAM])
    names = spec.glyph_names
    return [" ".join(names[glyph] for glyph in sample_glyph_sequence(spec, successors, rng)) for _ in range(count)]


def build_base_vocabulary(spec: SyntheticSpec, extra_tokens: int = 0) -> Vocabulary:
    """The untrimmed tokenizer vocabulary: glyph names plus ``extra_tokens`` distractors."""
    distractors = [f"w{index:04d}" for index in range(extra_tokens)]
    return Vocabulary.from_tokens([*spec.glyph_names, *distractors])


def corpus_statistics(corpus: Corpus) -> Dict[str, float]:
    statistics: Dict[str, float] = {}
    for split_name in Splits.names():
        samples = corpus.splits.get(split_name, [])
        if not samples:
            continue
        statistics[f"{split_name}_mean_transcript_length"] = float(
            np.mean([len(sample.transcript.split()) for sample in samples])
        )
        statistics[f"{split_name}_mean_frames"] = float(np.mean([sample.frame_count for sample in samples]))
    return statistics
