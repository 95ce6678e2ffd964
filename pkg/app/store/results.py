from __future__ import annotations

import csv
import logging
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

import numpy as np

from app.stats.verdicts import Verdict

logger = logging.getLogger(__name__)

VERDICT_FILE = "verdicts.txt"
MANIFEST_FILE = "manifest.txt"
CONFIG_ECHO_FILE = "config.txt"


def format_cell(value: Any) -> str:
    """Floats with 17 significant digits so CSVs round-trip bit for bit."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


class ResultStore:
    """Persistence boundary for experiment outputs.

    Experiments hand over rows, text lines and verdicts; only this class
    knows file names, encodings and number formats.
    """

    def __init__(self, output_dir: str | Path) -> None:
        self.output_dir = Path(output_dir)

    def initialize(self) -> None:
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.output_dir / name

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        target = self.path(name)
        with target.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            count = 0
            for row in rows:
                writer.writerow([format_cell(cell) for cell in row])
                count += 1
        logger.info("Wrote %s rows=%s", target, count)
        return target

    def write_lines(self, name: str, lines: Iterable[str]) -> Path:
        target = self.path(name)
        target.write_text("".join(f"{line}\n" for line in lines), encoding="utf-8")
        logger.info("Wrote %s", target)
        return target

    def write_text(self, name: str, text: str) -> Path:
        target = self.path(name)
        target.write_text(text, encoding="utf-8")
        return target

    def write_verdicts(self, verdicts: Sequence[Verdict]) -> Path:
        return self.write_lines(VERDICT_FILE, (verdict.line() for verdict in verdicts))

    def write_manifest(self, entries: dict[str, Any]) -> Path:
        return self.write_lines(MANIFEST_FILE, (f"{key} = {format_cell(value)}" for key, value in entries.items()))
