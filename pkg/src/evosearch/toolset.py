"""Assembly of the per-round tool registry.

Wires the filesystem verbs, environment-manager exec, web search, image
rendering, and the state bridge into one `ToolRegistry` with JSON-schema
parameter blocks the provider can advertise.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

from .agent import ToolOutcome, ToolRegistry, ToolSchema
from .bridge import StateBridge
from .execenv import DEFAULT_TIMEOUT, ExecRequest, run_exec
from .fileops import FileOps
from .guard import WorkspaceGuard
from .render import RenderSpec, render_file
from .websearch import web_search

logger = logging.getLogger(__name__)


def _schema(name: str, description: str, properties: dict, required: list[str]) -> ToolSchema:
    return ToolSchema(
        name=name,
        description=description,
        parameters={
            "type": "object",
            "properties": properties,
            "required": required,
        },
    )


def build_registry(
    guard: WorkspaceGuard,
    bridge: Optional[StateBridge] = None,
    exec_binary: str = "uv",
    offline_search: bool = False,
    include_search: bool = True,
) -> ToolRegistry:
    registry = ToolRegistry()
    ops = FileOps(guard)

    registry.register(
        _schema(
            "list_files",
            "List a workspace directory (name, kind, size).",
            {"path": {"type": "string", "description": "workspace-relative path"}},
            [],
        ),
        lambda args: ops.list(args.get("path", ".")),
    )
    registry.register(
        _schema(
            "read_file",
            "Read a text file; offset/length select a line window.",
            {
                "path": {"type": "string"},
                "offset": {"type": "integer"},
                "length": {"type": "integer"},
            },
            ["path"],
        ),
        lambda args: ops.read(
            args["path"], offset=args.get("offset", 0), length=args.get("length")
        ),
    )
    registry.register(
        _schema(
            "write_file",
            "Write text to a workspace file, creating parents.",
            {"path": {"type": "string"}, "content": {"type": "string"}},
            ["path", "content"],
        ),
        lambda args: ops.write(args["path"], args["content"]),
    )
    registry.register(
        _schema(
            "edit_file",
            "Replace one exact unique text span (old -> new).",
            {
                "path": {"type": "string"},
                "old": {"type": "string"},
                "new": {"type": "string"},
            },
            ["path", "old", "new"],
        ),
        lambda args: ops.edit(args["path"], args["old"], args["new"]),
    )
    registry.register(
        _schema(
            "copy_file",
            "Copy a file or directory within the workspace.",
            {"src": {"type": "string"}, "dst": {"type": "string"}},
            ["src", "dst"],
        ),
        lambda args: ops.copy(args["src"], args["dst"]),
    )
    registry.register(
        _schema(
            "move_file",
            "Move or rename within the workspace.",
            {"src": {"type": "string"}, "dst": {"type": "string"}},
            ["src", "dst"],
        ),
        lambda args: ops.move(args["src"], args["dst"]),
    )
    registry.register(
        _schema(
            "delete_file",
            "Delete a file; directories need recursive=true.",
            {"path": {"type": "string"}, "recursive": {"type": "boolean"}},
            ["path"],
        ),
        lambda args: ops.delete(args["path"], recursive=args.get("recursive", False)),
    )

    def _exec(args: dict) -> ToolOutcome:
        request = ExecRequest(
            subcommand=args["subcommand"],
            arguments=tuple(args.get("arguments", [])),
            working_dir=args.get("working_dir", "."),
            timeout=float(args.get("timeout", DEFAULT_TIMEOUT)),
        )
        result = run_exec(request, guard, binary=exec_binary)
        status = "timed out" if result.timed_out else f"exit {result.exit_code}"
        text = (
            f"{status} in {result.duration:.2f}s\n"
            f"--- stdout ---\n{result.stdout}\n--- stderr ---\n{result.stderr}"
        )
        return ToolOutcome(
            text=text,
            structured={
                "exit_code": result.exit_code,
                "timed_out": result.timed_out,
            },
            is_error=result.timed_out or result.exit_code != 0,
        )

    registry.register(
        _schema(
            "run_env_command",
            "Run the environment manager: subcommand add/remove/run plus arguments.",
            {
                "subcommand": {"type": "string", "enum": ["add", "remove", "run"]},
                "arguments": {"type": "array", "items": {"type": "string"}},
                "working_dir": {"type": "string"},
                "timeout": {"type": "number"},
            },
            ["subcommand"],
        ),
        _exec,
    )

    def _view_image(args: dict) -> ToolOutcome:
        spec = RenderSpec(
            p_low=float(args.get("p_low", 1.0)),
            p_high=float(args.get("p_high", 99.0)),
            log_scale=bool(args.get("log_scale", False)),
        )
        source = guard.resolve(args["path"])
        out_path, buffer = render_file(source, spec=spec)
        guard.resolve(out_path)  # render target must stay inside the workspace
        note = f" ({buffer.note})" if buffer.note else ""
        return ToolOutcome(
            text=(
                f"rendered {guard.relative(source)}{note}:"
                f" {buffer.width}x{buffer.height}, {buffer.channels} channel(s),"
                f" window p{spec.p_low}-p{spec.p_high},"
                f" log_scale={'on' if spec.log_scale else 'off'}"
            ),
            image_path=str(out_path),
        )

    registry.register(
        _schema(
            "view_image",
            "Render a TIFF/PNG/raw image to PNG with percentile windowing"
            " and optional log scaling; the image is attached in a follow-up.",
            {
                "path": {"type": "string"},
                "p_low": {"type": "number"},
                "p_high": {"type": "number"},
                "log_scale": {"type": "boolean"},
            },
            ["path"],
        ),
        _view_image,
    )

    if include_search:

        def _search(args: dict) -> ToolOutcome:
            outcome = web_search(
                args["backend"],
                args["query"],
                max_results=int(args.get("max_results", 5)),
                offline=offline_search,
            )
            if not outcome.ok:
                return ToolOutcome(
                    text=f"{outcome.backend} search {outcome.status}: {outcome.detail}",
                    is_error=outcome.status == "error",
                )
            lines = []
            for i, result in enumerate(outcome.results, start=1):
                lines.append(f"{i}. {result.title}\n   {result.identifier}\n   {result.snippet}")
            return ToolOutcome(
                text="\n".join(lines) or "no results",
                structured={"count": len(outcome.results)},
            )

        registry.register(
            _schema(
                "web_search",
                "Search arxiv, semantic_scholar, or tavily for literature/methods.",
                {
                    "backend": {
                        "type": "string",
                        "enum": ["arxiv", "semantic_scholar", "tavily"],
                    },
                    "query": {"type": "string"},
                    "max_results": {"type": "integer"},
                },
                ["backend", "query"],
            ),
            _search,
        )

    if bridge is not None:
        _register_bridge_tools(registry, bridge)
    return registry


def _register_bridge_tools(registry: ToolRegistry, bridge: StateBridge) -> None:
    registry.register(
        _schema(
            "set_primary_metric",
            "Define the session's primary optimization metric.",
            {
                "name": {"type": "string"},
                "direction": {"type": "string", "enum": ["maximize", "minimize"]},
                "description": {"type": "string"},
                "target_value": {"type": "number"},
            },
            ["name", "direction"],
        ),
        lambda args: bridge.set_primary_metric(
            args["name"],
            args["direction"],
            description=args.get("description", ""),
            target_value=args.get("target_value"),
        ),
    )
    registry.register(
        _schema(
            "log_evaluation",
            "Record a metric value for an existing candidate.",
            {
                "candidate_id": {"type": "integer"},
                "metric_name": {"type": "string"},
                "value": {"type": "number"},
            },
            ["candidate_id", "metric_name", "value"],
        ),
        lambda args: bridge.log_evaluation(
            args["candidate_id"], args["metric_name"], args["value"]
        ),
    )
    registry.register(
        _schema(
            "view_search_history",
            "Ranked history of candidates under the primary metric.",
            {"top_n": {"type": "integer"}},
            [],
        ),
        lambda args: bridge.view_search_history(top_n=args.get("top_n", 10)),
    )
    registry.register(
        _schema(
            "view_candidate",
            "Full record of one candidate with metrics and analysis.",
            {"candidate_id": {"type": "integer"}},
            ["candidate_id"],
        ),
        lambda args: bridge.view_candidate(args["candidate_id"]),
    )
    registry.register(
        _schema(
            "view_metric_history",
            "All recorded samples of one metric across candidates.",
            {"metric_name": {"type": "string"}},
            ["metric_name"],
        ),
        lambda args: bridge.view_metric_history(args["metric_name"]),
    )
    registry.register(
        _schema(
            "analyze_results",
            "Attach an analysis document to the candidate being prepared.",
            {"analysis": {"type": "string"}},
            ["analysis"],
        ),
        lambda args: bridge.analyze_results(args["analysis"]),
    )
    registry.register(
        _schema(
            "record_failure",
            "Record a failed attempt (code path + error) for this round.",
            {
                "failing_code_path": {"type": "string"},
                "error_message": {"type": "string"},
                "parent_ids": {"type": "array", "items": {"type": "integer"}},
                "settings": {"type": "object"},
                "metadata": {"type": "object"},
            },
            ["failing_code_path", "error_message"],
        ),
        lambda args: bridge.record_failure(
            args["failing_code_path"],
            args["error_message"],
            parent_ids=args.get("parent_ids"),
            settings=args.get("settings"),
            metadata=args.get("metadata"),
        ),
    )
    registry.register(
        _schema(
            "submit_candidate",
            "Formally register this round's candidate with its metrics.",
            {
                "description": {"type": "string"},
                "artifact_path": {"type": "string"},
                "metrics": {"type": "object"},
                "settings": {"type": "object"},
                "parent_ids": {"type": "array", "items": {"type": "integer"}},
                "suggested_next_action": {
                    "type": "string",
                    "enum": ["generate", "tune", "evolve"],
                },
                "notes": {"type": "string"},
            },
            ["description", "artifact_path"],
        ),
        lambda args: bridge.submit_candidate(
            args["description"],
            args["artifact_path"],
            metrics=args.get("metrics"),
            settings=args.get("settings"),
            parent_ids=args.get("parent_ids"),
            suggested_next_action=args.get("suggested_next_action"),
            notes=args.get("notes", ""),
        ),
    )
