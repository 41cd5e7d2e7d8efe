"""Workspace path confinement for agent-facing tools.

Every guarded operation resolves its target fully (following symlinks) and
then checks lexical containment under the workspace root. Resolving first
closes the classic escape where an in-root symlink points outside the root.

The guard constrains the tool layer only; code launched through the exec
tool runs unconstrained. Deploy the harness inside a container when that
matters (see README).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path


class GuardRejection(PermissionError):
    """Operation target resolves outside the workspace root."""

    def __init__(self, message: str, resolved: Path) -> None:
        super().__init__(message)
        self.resolved = resolved


@dataclass(frozen=True)
class WorkspaceGuard:
    root: Path

    @classmethod
    def create(cls, root: Path | str) -> "WorkspaceGuard":
        path = Path(root)
        if not path.is_dir():
            raise FileNotFoundError(f"guard root {path} is not a directory")
        return cls(root=path.resolve(strict=True))

    def resolve(self, candidate: Path | str) -> Path:
        return guard_path(candidate, self)

    def relative(self, resolved: Path) -> str:
        """Workspace-relative display form of an already-guarded path."""
        return str(resolved.relative_to(self.root)) if resolved != self.root else "."


def guard_path(candidate: Path | str, guard: WorkspaceGuard) -> Path:
    """Return the canonical path iff it lies within the guard root.

    Relative inputs are taken relative to the root. The check runs on the
    fully resolved path, so `../` hops and symlink indirections cannot
    escape undetected.
    """
    raw = Path(candidate)
    joined = raw if raw.is_absolute() else guard.root / raw
    resolved = joined.resolve()
    if resolved != guard.root and guard.root not in resolved.parents:
        raise GuardRejection(
            f"path {candidate!s} resolves to {resolved}, outside workspace"
            f" root {guard.root}",
            resolved,
        )
    return resolved
