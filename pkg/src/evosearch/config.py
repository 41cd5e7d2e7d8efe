"""Session configuration: a single TOML file with typed sections.

Paths are canonicalized against a base directory at load time so the rest
of the system only ever sees absolute paths. Credentials never live in the
file; the provider section names an environment variable instead.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .controller import ControllerConfig, ControllerError
from .sampling import SamplingConfig, SamplingError

PROVIDER_KINDS = ("scripted", "http")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ProviderConfig:
    kind: str = "scripted"
    transcript_dir: Optional[Path] = None
    base_url: str = ""
    model: str = ""
    api_key_env: str = "MODEL_API_KEY"
    timeout: float = 120.0
    temperature: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in PROVIDER_KINDS:
            raise ConfigError(
                f"provider kind must be one of {PROVIDER_KINDS}, got {self.kind!r}"
            )
        if self.kind == "scripted" and self.transcript_dir is None:
            raise ConfigError("scripted provider needs transcript_dir")
        if self.kind == "http" and not (self.base_url and self.model):
            raise ConfigError("http provider needs base_url and model")


@dataclass(frozen=True)
class SessionConfig:
    workspace_dir: Path
    task_prompt_path: Path
    data_dir: Path
    provider: ProviderConfig
    holdout_dir: Optional[Path] = None
    holdout_prompt_path: Optional[Path] = None
    db_path: Optional[Path] = None
    turn_budget: int = 60
    holdout_turn_budget: int = 20
    exec_binary: str = "uv"
    offline_search: bool = False
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)

    def __post_init__(self) -> None:
        if (self.holdout_dir is None) != (self.holdout_prompt_path is None):
            raise ConfigError(
                "holdout_dir and holdout_prompt_path must be set together"
            )
        if self.turn_budget < 1 or self.holdout_turn_budget < 1:
            raise ConfigError("turn budgets must be positive")
        if self.holdout_dir is not None:
            workspace = Path(self.workspace_dir).resolve()
            holdout = Path(self.holdout_dir).resolve()
            if holdout == workspace or workspace in holdout.parents:
                raise ConfigError(
                    "holdout_dir must live outside workspace_dir to keep"
                    " held-out data isolated"
                )

    @property
    def database_path(self) -> Path:
        return self.db_path if self.db_path is not None else self.workspace_dir / "state.db"

    def validate_inputs(self) -> None:
        """Existence checks for paths that must be present before a run."""
        if not Path(self.task_prompt_path).is_file():
            raise ConfigError(f"task prompt file missing: {self.task_prompt_path}")
        if not Path(self.data_dir).is_dir():
            raise ConfigError(f"data directory missing: {self.data_dir}")
        if self.holdout_dir is not None and not Path(self.holdout_dir).is_dir():
            raise ConfigError(f"holdout directory missing: {self.holdout_dir}")
        if self.holdout_prompt_path is not None and not Path(
            self.holdout_prompt_path
        ).is_file():
            raise ConfigError(
                f"holdout prompt file missing: {self.holdout_prompt_path}"
            )
        if self.provider.kind == "scripted" and not Path(
            self.provider.transcript_dir
        ).is_dir():
            raise ConfigError(
                f"transcript directory missing: {self.provider.transcript_dir}"
            )


def _canonical(base: Path, value: str) -> Path:
    path = Path(value).expanduser()
    if not path.is_absolute():
        path = base / path
    return path.resolve()


def _section(data: dict, name: str) -> dict:
    section = data.get(name, {})
    if not isinstance(section, dict):
        raise ConfigError(f"[{name}] must be a table")
    return dict(section)


def _take(section: dict, known: set[str], name: str) -> None:
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in [{name}]: {sorted(unknown)}")


def _build(cls, section: dict, name: str, error_type):
    _take(section, {f.name for f in fields(cls)}, name)
    try:
        return cls(**section)
    except error_type as exc:
        raise ConfigError(f"[{name}] invalid: {exc}")


def load_config(path: Path | str, base_dir: Optional[Path] = None) -> SessionConfig:
    """Parse and canonicalize a session config file.

    Relative paths inside the file resolve against `base_dir` (the
    invocation directory by default).
    """
    path = Path(path)
    base = Path(base_dir).resolve() if base_dir is not None else Path.cwd()
    try:
        data = tomllib.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config {path} is not valid TOML: {exc}")

    session = _section(data, "session")
    known = {
        "workspace_dir",
        "task_prompt_path",
        "data_dir",
        "holdout_dir",
        "holdout_prompt_path",
        "db_path",
        "turn_budget",
        "holdout_turn_budget",
        "exec_binary",
        "offline_search",
    }
    _take(session, known, "session")
    for required in ("workspace_dir", "task_prompt_path", "data_dir"):
        if required not in session:
            raise ConfigError(f"[session] is missing {required!r}")
    for key in (
        "workspace_dir",
        "task_prompt_path",
        "data_dir",
        "holdout_dir",
        "holdout_prompt_path",
        "db_path",
    ):
        if key in session:
            session[key] = _canonical(base, str(session[key]))

    controller_section = _section(data, "controller")
    # TOML has no null: zero disables the optional cadence/patience knobs
    for optional in ("forced_generate_every", "early_stop_patience"):
        if controller_section.get(optional) == 0:
            controller_section[optional] = None
    controller = _build(
        ControllerConfig, controller_section, "controller", ControllerError
    )

    sampling = _build(SamplingConfig, _section(data, "sampling"), "sampling", SamplingError)

    provider_section = _section(data, "provider")
    if "transcript_dir" in provider_section:
        provider_section["transcript_dir"] = _canonical(
            base, str(provider_section["transcript_dir"])
        )
    provider = _build(ProviderConfig, provider_section, "provider", ConfigError)

    unknown_tables = set(data) - {"session", "controller", "sampling", "provider"}
    if unknown_tables:
        raise ConfigError(f"unknown table(s): {sorted(unknown_tables)}")
    try:
        return SessionConfig(
            provider=provider, controller=controller, sampling=sampling, **session
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid session config: {exc}")


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    text = str(value).replace("\\", "\\\\").replace('"', '\\"')
    return f'"{text}"'


def serialize_config(cfg: SessionConfig) -> str:
    """Render a config back to TOML; load_config(serialize_config(c)) == c."""
    lines = ["[session]"]
    session_pairs = [
        ("workspace_dir", cfg.workspace_dir),
        ("task_prompt_path", cfg.task_prompt_path),
        ("data_dir", cfg.data_dir),
        ("holdout_dir", cfg.holdout_dir),
        ("holdout_prompt_path", cfg.holdout_prompt_path),
        ("db_path", cfg.db_path),
        ("turn_budget", cfg.turn_budget),
        ("holdout_turn_budget", cfg.holdout_turn_budget),
        ("exec_binary", cfg.exec_binary),
        ("offline_search", cfg.offline_search),
    ]
    for key, value in session_pairs:
        if value is not None:
            lines.append(f"{key} = {_toml_value(value)}")

    lines += ["", "[controller]"]
    for f in fields(ControllerConfig):
        value = getattr(cfg.controller, f.name)
        if value is None:
            value = 0  # parsed back as "disabled"
        lines.append(f"{f.name} = {_toml_value(value)}")

    lines += ["", "[sampling]"]
    for f in fields(SamplingConfig):
        value = getattr(cfg.sampling, f.name)
        if value is None:
            continue
        lines.append(f"{f.name} = {_toml_value(value)}")

    lines += ["", "[provider]"]
    for f in fields(ProviderConfig):
        value = getattr(cfg.provider, f.name)
        if value is None:
            continue
        lines.append(f"{f.name} = {_toml_value(value)}")
    return "\n".join(lines) + "\n"
