from __future__ import annotations
import sys
import time
import traceback
from pathlib import Path
from typing import IO


class RunLog:
    """Messages of one pipeline run, to stdout and to run.log in the output directory."""

    def __init__(self, echo: IO[str] | None = None):
        self.echo = sys.stdout if echo is None else echo
        self.log_file: IO[str] | None = None
        self.path: Path | None = None

    def open_log_file(self, path: Path) -> None:
        assert self.log_file is None
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            file = path.open("a", encoding="utf-8")
            print("*** LOGGING BEGINS", time.asctime(), file=file, flush=True)
            self.log_file = file
            self.path = path
        except OSError:
            traceback.print_exc()

    def close_log_file(self) -> None:
        if self.log_file is not None:
            print("*** LOGGING ENDS", time.asctime(), file=self.log_file, flush=True)
            self.log_file.close()
            self.log_file = None

    def add_message(self, stage: str, text: str) -> None:
        # right-align stage names
        padding = " " * (12 - len(stage))
        print(time.strftime("[%H:%M]") + " " + padding + stage + " | " + text, file=self.echo)
        if self.log_file is not None:
            print(time.asctime(), stage, text, sep="\t", file=self.log_file, flush=True)

    def solver_progress(self, stage: str) -> ProgressPrinter:
        return ProgressPrinter(self, stage)

    def __enter__(self) -> RunLog:
        return self

    def __exit__(self, *junk: object) -> None:
        self.close_log_file()


class ProgressPrinter:
    def __init__(self, log: RunLog, stage: str):
        self.log = log
        self.stage = stage

    def __call__(self, iteration: int, span: float) -> None:
        self.log.add_message(self.stage, f"iteration {iteration}, span {span:.3e}")
