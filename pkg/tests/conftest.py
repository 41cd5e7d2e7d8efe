"""Shared fixtures: workspace guards and an environment-manager stand-in."""

from __future__ import annotations

import os
import stat
import textwrap

import pytest

from evosearch.guard import WorkspaceGuard

# Stand-in for the real environment-manager binary so exec behavior is
# testable in minimal environments: `run` delegates to the interpreter,
# `add`/`remove` append to a .deps ledger, and any package name containing
# "nonexistent" fails resolution.
UV_SHIM = textwrap.dedent(
    """\
    #!/bin/sh
    cmd="$1"
    [ -n "$cmd" ] && shift
    case "$cmd" in
      run)
        if [ "$1" = "python" ] || [ "$1" = "python3" ]; then shift; fi
        exec python3 "$@"
        ;;
      add)
        for pkg in "$@"; do
          case "$pkg" in
            *nonexistent*)
              echo "error: package '$pkg' was not found in the registry" >&2
              exit 1
              ;;
          esac
        done
        echo "added: $*" >> .deps
        echo "Resolved $# package(s)"
        ;;
      remove)
        echo "removed: $*" >> .deps
        echo "Removed $# package(s)"
        ;;
      *)
        echo "unsupported subcommand: $cmd" >&2
        exit 2
        ;;
    esac
    """
)


@pytest.fixture(scope="session")
def uv_shim(tmp_path_factory) -> str:
    path = tmp_path_factory.mktemp("shim") / "uv"
    path.write_text(UV_SHIM)
    path.chmod(path.stat().st_mode | stat.S_IXUSR | stat.S_IXGRP | stat.S_IXOTH)
    return str(path)


@pytest.fixture
def guard(tmp_path) -> WorkspaceGuard:
    root = tmp_path / "workspace"
    root.mkdir()
    return WorkspaceGuard.create(root)
