"""Path-guarded filesystem verbs exposed to the agent.

All verbs raise on misuse (guard rejection, ambiguous edit, unsafe delete);
the tool layer converts raised errors into error outcomes for the model.
"""

from __future__ import annotations

import logging
import shutil
from pathlib import Path
from typing import Optional

from .agent import ToolOutcome
from .guard import WorkspaceGuard

logger = logging.getLogger(__name__)


class FileOpError(ValueError):
    pass


class FileOps:
    """Filesystem verbs scoped to one workspace guard."""

    def __init__(self, guard: WorkspaceGuard) -> None:
        self.guard = guard

    def list(self, path: str = ".") -> ToolOutcome:
        target = self.guard.resolve(path)
        if not target.exists():
            raise FileOpError(f"{path} does not exist")
        if target.is_file():
            return ToolOutcome(text=f"{self.guard.relative(target)}  ({target.stat().st_size} bytes)")
        lines = []
        for entry in sorted(target.iterdir(), key=lambda p: (p.is_file(), p.name)):
            if entry.is_dir():
                lines.append(f"{entry.name}/")
            else:
                lines.append(f"{entry.name}  ({entry.stat().st_size} bytes)")
        body = "\n".join(lines) if lines else "(empty directory)"
        return ToolOutcome(text=body, structured={"entries": len(lines)})

    def read(
        self, path: str, offset: int = 0, length: Optional[int] = None
    ) -> ToolOutcome:
        """Read a text window of `length` lines starting at line `offset`."""
        target = self.guard.resolve(path)
        if not target.is_file():
            raise FileOpError(f"{path} is not a readable file")
        lines = target.read_text(errors="replace").splitlines(keepends=True)
        total = len(lines)
        window = lines[offset : offset + length if length is not None else None]
        text = "".join(window)
        if offset > 0 or (length is not None and offset + length < total):
            text += f"\n[lines {offset}..{offset + len(window)} of {total}]"
        return ToolOutcome(text=text, structured={"total_lines": total})

    def write(self, path: str, content: str) -> ToolOutcome:
        target = self.guard.resolve(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(content)
        return ToolOutcome(
            text=f"wrote {len(content.encode())} bytes to {self.guard.relative(target)}"
        )

    def edit(self, path: str, old: str, new: str) -> ToolOutcome:
        """Replace one exact unique text span. Ambiguity is an error."""
        target = self.guard.resolve(path)
        if not target.is_file():
            raise FileOpError(f"{path} is not an editable file")
        content = target.read_text()
        count = content.count(old)
        if count == 0:
            raise FileOpError(f"edit span not found in {path}")
        if count > 1:
            raise FileOpError(
                f"edit span occurs {count} times in {path}; it must be unique"
            )
        target.write_text(content.replace(old, new, 1))
        return ToolOutcome(text=f"edited {self.guard.relative(target)}")

    def copy(self, src: str, dst: str) -> ToolOutcome:
        source = self.guard.resolve(src)
        dest = self.guard.resolve(dst)
        if not source.exists():
            raise FileOpError(f"{src} does not exist")
        dest.parent.mkdir(parents=True, exist_ok=True)
        if source.is_dir():
            shutil.copytree(source, dest)
        else:
            shutil.copy2(source, dest)
        return ToolOutcome(
            text=f"copied {self.guard.relative(source)} -> {self.guard.relative(dest)}"
        )

    def move(self, src: str, dst: str) -> ToolOutcome:
        source = self.guard.resolve(src)
        dest = self.guard.resolve(dst)
        if not source.exists():
            raise FileOpError(f"{src} does not exist")
        dest.parent.mkdir(parents=True, exist_ok=True)
        shutil.move(str(source), str(dest))
        return ToolOutcome(
            text=f"moved {self.guard.relative(source)} -> {self.guard.relative(dest)}"
        )

    def delete(self, path: str, recursive: bool = False) -> ToolOutcome:
        target = self.guard.resolve(path)
        if target == self.guard.root:
            raise FileOpError("refusing to delete the workspace root")
        if not target.exists():
            raise FileOpError(f"{path} does not exist")
        if target.is_dir():
            if any(target.iterdir()) and not recursive:
                raise FileOpError(
                    f"{path} is a non-empty directory; pass recursive=true to delete"
                )
            shutil.rmtree(target)
        else:
            target.unlink()
        return ToolOutcome(text=f"deleted {self.guard.relative(target)}")
