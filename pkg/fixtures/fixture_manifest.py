"""Declarative index of the runnable fixture corpus.

Each entry records where a script lives, which behavior it is committed
to (metric line, crash, timeout, image output), and the frozen metric
value where one applies. Integration tests and the self-test below both
drive scripts through run_fixture so invocation stays uniform.
"""

from __future__ import annotations

import re
import subprocess
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

CORPUS_DIR = Path(__file__).parent / "corpus"

METRIC_PATTERN = re.compile(r"^metric: (?P<value>-?\d+(?:\.\d+)?)$", re.MULTILINE)

BEHAVIORS = ("metric", "crash", "timeout", "image")


@dataclass(frozen=True)
class FixtureScript:
    name: str
    path: Path
    behavior: str
    expected_metric: Optional[float] = None
    declares_dependency: bool = False

    def __post_init__(self) -> None:
        if self.behavior not in BEHAVIORS:
            raise ValueError(f"unknown behavior {self.behavior!r}")


REGISTRY = (
    FixtureScript(
        name="registration_stub",
        path=CORPUS_DIR / "registration_stub.py",
        behavior="metric",
        expected_metric=0.0,
    ),
    FixtureScript(
        name="holdout_f1",
        path=CORPUS_DIR / "holdout_f1.py",
        behavior="metric",
        expected_metric=0.788,
    ),
    FixtureScript(
        name="crash",
        path=CORPUS_DIR / "crash.py",
        behavior="crash",
    ),
    FixtureScript(
        name="timeout",
        path=CORPUS_DIR / "timeout.py",
        behavior="timeout",
    ),
    FixtureScript(
        name="image_writer",
        path=CORPUS_DIR / "image_writer.py",
        behavior="image",
        expected_metric=131.5,
    ),
    FixtureScript(
        name="needs_dependency",
        path=CORPUS_DIR / "needs_dependency.py",
        behavior="metric",
        expected_metric=1.0,
        declares_dependency=True,
    ),
)


def by_name(name: str) -> FixtureScript:
    for script in REGISTRY:
        if script.name == name:
            return script
    raise KeyError(f"no fixture named {name!r}")


def run_fixture(
    script: FixtureScript,
    args: Sequence[str] = (),
    timeout: Optional[float] = None,
    cwd: Optional[Path] = None,
) -> subprocess.CompletedProcess:
    """Execute one fixture with the current interpreter and capture output."""
    return subprocess.run(
        [sys.executable, str(script.path), *args],
        capture_output=True,
        text=True,
        timeout=timeout,
        cwd=cwd,
    )


def extract_metric(stdout: str) -> float:
    """The value of the single `metric: <float>` line; anything else fails."""
    matches = METRIC_PATTERN.findall(stdout)
    if len(matches) != 1:
        raise ValueError(
            f"expected exactly one metric line, found {len(matches)}: {stdout!r}"
        )
    return float(matches[0])
