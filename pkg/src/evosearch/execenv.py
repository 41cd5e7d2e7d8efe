"""Allowlisted environment-manager command execution.

Candidates manage their own per-workspace runtime through a fixed binary
(`uv` by default) restricted to the `add`, `remove`, and `run` subcommands.
Streams are captured with a hard cap so tool output cannot blow up the
model context.
"""

from __future__ import annotations

import logging
import signal
import subprocess
import time
from dataclasses import dataclass
from typing import Optional

from .guard import WorkspaceGuard

logger = logging.getLogger(__name__)

ALLOWED_SUBCOMMANDS = ("add", "remove", "run")
DEFAULT_TIMEOUT = 300.0
DEFAULT_OUTPUT_CAP = 64 * 1024
TRUNCATION_MARK = "\n[... output truncated ...]"


class ExecError(ValueError):
    pass


class ExecEnvironmentError(RuntimeError):
    """The environment-manager binary is missing or unusable."""


@dataclass(frozen=True)
class ExecRequest:
    subcommand: str
    arguments: tuple[str, ...] = ()
    working_dir: str = "."
    timeout: float = DEFAULT_TIMEOUT

    def __post_init__(self) -> None:
        if self.subcommand not in ALLOWED_SUBCOMMANDS:
            raise ExecError(
                f"subcommand {self.subcommand!r} is not allowed; permitted:"
                f" {', '.join(ALLOWED_SUBCOMMANDS)}"
            )
        if self.timeout <= 0:
            raise ExecError("timeout must be positive")


@dataclass(frozen=True)
class ExecResult:
    exit_code: int
    stdout: str
    stderr: str
    duration: float
    timed_out: bool


def run_exec(
    req: ExecRequest,
    guard: WorkspaceGuard,
    binary: str = "uv",
    output_cap: int = DEFAULT_OUTPUT_CAP,
) -> ExecResult:
    workdir = guard.resolve(req.working_dir)
    if not workdir.is_dir():
        raise ExecError(f"working_dir {req.working_dir!r} is not a directory")
    argv = [binary, req.subcommand, *req.arguments]
    started = time.monotonic()
    try:
        completed = subprocess.run(
            argv,
            cwd=str(workdir),
            capture_output=True,
            text=True,
            timeout=req.timeout,
        )
        duration = time.monotonic() - started
        return ExecResult(
            exit_code=completed.returncode,
            stdout=_cap(completed.stdout, output_cap),
            stderr=_cap(completed.stderr, output_cap),
            duration=duration,
            timed_out=False,
        )
    except subprocess.TimeoutExpired as exc:
        duration = time.monotonic() - started
        logger.warning("%s timed out after %.1fs", " ".join(argv), req.timeout)
        return ExecResult(
            exit_code=-signal.SIGKILL,
            stdout=_cap(_decode(exc.stdout), output_cap),
            stderr=_cap(_decode(exc.stderr), output_cap),
            duration=duration,
            timed_out=True,
        )
    except FileNotFoundError as exc:
        raise ExecEnvironmentError(
            f"environment-manager binary {binary!r} not found; install it or"
            " point exec_binary at an equivalent executable"
        ) from exc


def _decode(stream: Optional[bytes | str]) -> str:
    if stream is None:
        return ""
    if isinstance(stream, bytes):
        return stream.decode(errors="replace")
    return stream


def _cap(text: str, cap: int) -> str:
    if len(text) <= cap:
        return text
    return text[:cap] + TRUNCATION_MARK
