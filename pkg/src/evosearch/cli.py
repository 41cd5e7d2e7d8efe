"""Operator entry point: scaffold, run, resume, report, toy, render.

A thin single-threaded driver over the controller. Exit codes follow one
contract everywhere: 0 for clean completion (including early stops), 2 for
configuration and validation problems, 3 for runtime failures such as an
aborted session or an unrenderable image.
"""

from __future__ import annotations

import argparse
import shutil
import sys
from pathlib import Path
from typing import Optional

from .config import ConfigError, SessionConfig, load_config, serialize_config
from .controller import run_session
from .render import (
    ImageBuffer,
    RenderError,
    RenderSpec,
    convert_tiff,
    read_raw,
    render_to,
)
from .report import SessionReport, build_report, report_to_csv, report_to_json, report_to_text
from .session import AgentRoundExecutor, make_holdout_hook
from .store import SearchStore, StoreError, open_or_create, recover_session
from .toybench import (
    DEFAULT_ROUNDS_CAP,
    reference_scenario,
    run_trials,
    summarize,
    trials_to_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

WORKSPACE_CONFIG_NAME = "session_config.toml"
ABORT_PREFIX = "session aborted"


def _say(message: str) -> None:
    print(message)


def _complain(message: str) -> None:
    print(f"error: {message}", file=sys.stderr)


def _init_workspace(cfg: SessionConfig) -> bool:
    """Scaffold workspace, data copy, config copy, and store.

    Returns False when the session database already exists (no-op).
    """
    db = cfg.database_path
    if db.exists():
        return False
    workspace = Path(cfg.workspace_dir)
    workspace.mkdir(parents=True, exist_ok=True)
    shutil.copytree(cfg.data_dir, workspace / "data", dirs_exist_ok=True)
    (workspace / WORKSPACE_CONFIG_NAME).write_text(serialize_config(cfg))
    db.parent.mkdir(parents=True, exist_ok=True)
    open_or_create(db)
    return True


def _write_reports(workspace_dir: Path, report: SessionReport) -> None:
    Path(workspace_dir, "report.json").write_text(report_to_json(report))
    Path(workspace_dir, "report.csv").write_text(report_to_csv(report))


def _finish(cfg: SessionConfig, store: SearchStore, report: SessionReport) -> int:
    _write_reports(cfg.workspace_dir, report)
    _say(report_to_text(report))
    aborted = (report.stop_reason or "").startswith(ABORT_PREFIX)
    if aborted:
        _complain(report.stop_reason)
    return EXIT_RUNTIME if aborted else EXIT_OK


def _execute(cfg: SessionConfig) -> int:
    store, recovery = recover_session(cfg.database_path)
    if recovery.resume_round is None:
        _say("session already finished; nothing to resume")
        return _finish(cfg, store, build_report(store))
    if recovery.failed_rounds:
        _say(f"recovery: rounds {list(recovery.failed_rounds)} marked failed")
    executor = AgentRoundExecutor(cfg)
    holdout = make_holdout_hook(cfg, store, executor.factory)
    report = run_session(
        cfg.controller,
        store,
        executor,
        sampling=cfg.sampling,
        holdout=holdout,
        resume_from=recovery.resume_round,
    )
    return _finish(cfg, store, report)


def cmd_init(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    cfg.validate_inputs()
    if _init_workspace(cfg):
        _say(f"initialized workspace at {cfg.workspace_dir}")
    else:
        _say(f"workspace already initialized at {cfg.workspace_dir}; nothing to do")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    cfg.validate_inputs()
    if _init_workspace(cfg):
        _say(f"initialized workspace at {cfg.workspace_dir}")
    return _execute(cfg)


def _workspace_config(workspace_dir: Path) -> SessionConfig:
    config_path = Path(workspace_dir) / WORKSPACE_CONFIG_NAME
    if not config_path.is_file():
        raise ConfigError(
            f"{workspace_dir} is not an initialized workspace"
            f" (missing {WORKSPACE_CONFIG_NAME})"
        )
    return load_config(config_path, base_dir=workspace_dir)


def cmd_resume(args: argparse.Namespace) -> int:
    cfg = _workspace_config(args.workspace)
    if not cfg.database_path.exists():
        raise ConfigError(f"no session database at {cfg.database_path}")
    return _execute(cfg)


def cmd_report(args: argparse.Namespace) -> int:
    workspace = Path(args.workspace)
    config_path = workspace / WORKSPACE_CONFIG_NAME
    db = (
        _workspace_config(workspace).database_path
        if config_path.is_file()
        else workspace / "state.db"
    )
    if not db.exists():
        raise ConfigError(f"no session database at {db}")
    store = open_or_create(db)
    report = build_report(store)
    if not report.rounds:
        _say("empty report: the session has no rounds yet")
    _write_reports(workspace, report)
    _say(report_to_text(report))
    return EXIT_OK


def cmd_toy(args: argparse.Namespace) -> int:
    taus = args.tau if args.tau else [0.0, 5.0]
    landscape, init_points = reference_scenario()
    results = run_trials(
        landscape,
        init_points,
        taus=taus,
        trials=args.trials,
        rounds_cap=args.rounds_cap,
    )
    out = Path(args.out)
    out.write_text(trials_to_csv(results))
    _say(f"wrote {len(results)} trial rows to {out}")
    _say(summarize(results, rounds_cap=args.rounds_cap))
    return EXIT_OK


def _load_image(path: Path) -> ImageBuffer:
    if path.suffix.lower() in (".tif", ".tiff"):
        return convert_tiff(path)
    return read_raw(path)


def cmd_render(args: argparse.Namespace) -> int:
    source = Path(args.image)
    if not source.is_file():
        raise ConfigError(f"no such image: {source}")
    try:
        spec = RenderSpec(p_low=args.plow, p_high=args.phigh, log_scale=args.log)
    except RenderError as exc:  # bad flags are a validation problem
        raise ConfigError(str(exc))
    out = Path(args.out) if args.out else source.with_suffix(".png")
    img = _load_image(source)
    render_to(img, out, spec)
    if img.note:
        _say(f"note: {img.note}")
    _say(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evosearch",
        description="autonomous algorithm-search harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_init = sub.add_parser("init", help="scaffold a session workspace")
    p_init.add_argument("config", help="session config file (TOML)")
    p_init.set_defaults(func=cmd_init)

    p_run = sub.add_parser("run", help="run (or continue) a session")
    p_run.add_argument("config", help="session config file (TOML)")
    p_run.set_defaults(func=cmd_run)

    p_resume = sub.add_parser("resume", help="resume a session from its workspace")
    p_resume.add_argument("workspace", help="initialized workspace directory")
    p_resume.set_defaults(func=cmd_resume)

    p_report = sub.add_parser("report", help="rebuild report artifacts")
    p_report.add_argument("workspace", help="workspace directory with a session db")
    p_report.set_defaults(func=cmd_report)

    p_toy = sub.add_parser("toy", help="run the 2-D sampler ablation benchmark")
    p_toy.add_argument(
        "--tau", action="append", type=float, help="temperature (repeatable)"
    )
    p_toy.add_argument("--trials", type=int, default=20)
    p_toy.add_argument("--rounds-cap", type=int, default=DEFAULT_ROUNDS_CAP)
    p_toy.add_argument("--out", default="toy_trials.csv")
    p_toy.set_defaults(func=cmd_toy)

    p_render = sub.add_parser("render", help="render a quantitative image to PNG")
    p_render.add_argument("image", help="TIFF or raw sidecar image")
    p_render.add_argument("--out", default=None)
    p_render.add_argument("--plow", type=float, default=1.0)
    p_render.add_argument("--phigh", type=float, default=99.0)
    p_render.add_argument("--log", action="store_true")
    p_render.set_defaults(func=cmd_render)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _complain(str(exc))
        return EXIT_CONFIG
    except (StoreError, RenderError, OSError) as exc:
        _complain(str(exc))
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
