from __future__ import annotations

import csv
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from fla_slt.common.logger import LoggerFactory

LOG = LoggerFactory.get_logger(__name__)


class MetricsLog:
    """CSV ``step,epoch,split,loss,bleu4,lr_<group>...,config_hash``.

    A fresh run truncates an existing log on its first row. A resumed run keeps the rows of the epochs its
    checkpoint covers and rewrites them under the current header.
    """

    def __init__(self, path: Path, group_names: Sequence[str], config_hash: str) -> None:
        self.path = path
        self.config_hash = config_hash
        self.columns: List[str] = ["step", "epoch", "split", "loss", "bleu4"]
        self.columns += [f"lr_{name}" for name in group_names]
        self.columns.append("config_hash")
        self._ready = False

    @property
    def ready(self) -> bool:
        return self._ready

    def start(self) -> None:
        self._rewrite([])

    def resume(self, epoch: int) -> None:
        kept = [row for row in self.rows() if int(row["epoch"]) < epoch] if self.path.is_file() else []
        self._rewrite(kept)
        LOG.debug(f"{self.path}: kept {len(kept)} rows of epochs below {epoch}")

    def _rewrite(self, rows: Sequence[Dict[str, str]]) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "w", newline="", encoding="utf-8") as log_file:
            writer = csv.DictWriter(log_file, fieldnames=self.columns, restval="", extrasaction="ignore")
            writer.writeheader()
            writer.writerows(rows)
        self._ready = True

    def append(
        self,
        step: int,
        epoch: int,
        split: str,
        loss: float,
        rates: Optional[Dict[str, float]] = None,
        bleu4: Optional[float] = None,
    ) -> None:
        row: Dict[str, object] = {
            "step": step,
            "epoch": epoch,
            "split": split,
            "loss": repr(float(loss)),
            "bleu4": "" if bleu4 is None else repr(float(bleu4)),
            "config_hash": self.config_hash,
        }
        for name, rate in (rates or {}).items():
            row[f"lr_{name}"] = repr(float(rate))
        if not self._ready:
            self.start()
        with open(self.path, "a", newline="", encoding="utf-8") as log_file:
            csv.DictWriter(log_file, fieldnames=self.columns, restval="").writerow(row)

    def rows(self) -> List[Dict[str, str]]:
        with open(self.path, "r", newline="", encoding="utf-8") as log_file:
            return list(csv.DictReader(log_file))

    def losses(self, split: str = "train") -> List[float]:
        return [float(row["loss"]) for row in self.rows() if row["split"] == split]
