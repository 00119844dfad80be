from collections import namedtuple
from dataclasses import dataclass, fields
from typing import List

PAD_TOKEN = "<pad>"
BOS_TOKEN = "<bos>"
EOS_TOKEN = "<eos>"
UNK_TOKEN = "<unk>"
SPECIAL_TOKENS = (PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN)


MANIFEST_FILE_NAME = "manifest.json"
FRAMES_DIRECTORY_NAME = "frames"
FRAME_FILE_FORMAT = "{index:05d}.png"
VOCABULARY_FILE_NAME = "vocabulary.txt"
METRICS_LOG_FILE_NAME = "metrics.csv"
TRACE_FILE_NAME = "trace.csv"
REPORT_FILE_NAME = "report.json"
HYPOTHESES_FILE_NAME = "hypotheses.tsv"
SUMMARY_FILE_NAME = "summary.csv"
TIMINGS_FILE_NAME = "timings.csv"


BLOB_MAGIC = b"FLASLT01"
BLOB_SUFFIX = ".bin"


THREADS_ENVIRONMENT_VARIABLE = "FLA_SLT_THREADS"


LABEL_SMOOTHING: float = 0.2
GRADIENT_CLIP_NORM: float = 5.0
BEAM_SIZE: int = 5


ExitCode = namedtuple("ExitCode", "code description")


@dataclass
class ExitCodes:
    success: ExitCode = ExitCode(0, "success")
    config_error: ExitCode = ExitCode(2, "config error")
    divergence: ExitCode = ExitCode(3, "runtime divergence")
    io_error: ExitCode = ExitCode(4, "I/O error")

    @classmethod
    def codes(cls) -> List[int]:
        return [field.default.code for field in fields(cls)]


Split = namedtuple("Split", "name index")


@dataclass
class Splits:
    train: Split = Split("train", 0)
    dev: Split = Split("dev", 1)
    test: Split = Split("test", 2)

    @classmethod
    def names(cls) -> List[str]:
        return [field.default.name for field in fields(cls)]
