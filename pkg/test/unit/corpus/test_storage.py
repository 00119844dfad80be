import json
from pathlib import Path

import numpy as np
import pytest

from fla_slt.common.constants import MANIFEST_FILE_NAME
from fla_slt.common.exceptions import CorpusError, CorpusFormatError, MissingFrameError
from fla_slt.corpus.sign_video import Corpus, SignVideo
from fla_slt.corpus.storage import frame_path, load_corpus, save_corpus


@pytest.fixture()
def saved_corpus(tmp_path: Path, tiny_corpus: Corpus) -> Path:
    return save_corpus(tiny_corpus, tmp_path / "corpus", config_hash="abc")


def test_save_then_load_restores_binary_frames(saved_corpus: Path, tiny_corpus: Corpus) -> None:
    loaded = load_corpus(saved_corpus)
    assert len(loaded) == len(tiny_corpus)
    for original, restored in zip(tiny_corpus, loaded):
        assert restored.sample_id == original.sample_id
        assert restored.transcript == original.transcript
        np.testing.assert_array_equal(restored.frames, original.frames)


def test_manifest_records_the_config_hash(saved_corpus: Path) -> None:
    with open(saved_corpus / MANIFEST_FILE_NAME) as manifest_file:
        manifest = json.load(manifest_file)
    assert manifest["config_hash"] == "abc"
    assert {entry["split"] for entry in manifest["samples"]} == {"train", "dev", "test"}


def test_missing_frame_names_the_sample(saved_corpus: Path, tiny_corpus: Corpus) -> None:
    sample = tiny_corpus.dev[1]
    frame_path(saved_corpus, sample.sample_id, 0).unlink()
    with pytest.raises(MissingFrameError) as error:
        load_corpus(saved_corpus)
    assert error.value.sample_id == sample.sample_id


def test_missing_manifest(tmp_path: Path) -> None:
    with pytest.raises(CorpusFormatError):
        load_corpus(tmp_path)


def test_unknown_split(saved_corpus: Path) -> None:
    with open(saved_corpus / MANIFEST_FILE_NAME) as manifest_file:
        manifest = json.load(manifest_file)
    manifest["samples"][0]["split"] = "validation"
    with open(saved_corpus / MANIFEST_FILE_NAME, "w") as manifest_file:
        json.dump(manifest, manifest_file)
    with pytest.raises(CorpusFormatError):
        load_corpus(saved_corpus)


@pytest.mark.parametrize(
    "frames, transcript",
    [
        (np.zeros((2, 1, 8, 8), dtype=np.float32), "a"),
        (np.zeros((0, 3, 8, 8), dtype=np.float32), "a"),
        (np.zeros((2, 3, 8, 8), dtype=np.float32), "  "),
    ],
)
def test_invalid_sign_video(frames: np.ndarray, transcript: str) -> None:
    with pytest.raises(CorpusError):
        SignVideo(frames=frames, transcript=transcript, sample_id="broken")


def test_unknown_split_lookup(tiny_corpus: Corpus) -> None:
    with pytest.raises(CorpusError):
        tiny_corpus["validation"]
