#!/usr/bin/env python3
"""Run the bundled six-round scripted demo session in a scratch directory.

Usage: python scripts/run_demo.py [target_dir]

Copies nothing into the repository: the workspace, state database, and
reports all land under the target directory (default: ./demo_run).
"""

import sys
from pathlib import Path

from evosearch.cli import main as cli_main

REPO = Path(__file__).resolve().parent.parent
DEMO = REPO / "tests" / "data" / "demo"


def write_config(target: Path) -> Path:
    target.mkdir(parents=True, exist_ok=True)
    config = target / "session.toml"
    config.write_text(
        "[session]\n"
        f'workspace_dir = "{target / "workspace"}"\n'
        f'task_prompt_path = "{DEMO / "task.md"}"\n'
        f'data_dir = "{DEMO / "data"}"\n'
        'exec_binary = "uv"\n'
        "turn_budget = 30\n"
        "\n[controller]\n"
        "total_rounds = 5\n"
        "warmup_generate_rounds = 2\n"
        "forced_generate_every = 3\n"
        "\n[sampling]\n"
        "stochastic = false\n"
        "\n[provider]\n"
        'kind = "scripted"\n'
        f'transcript_dir = "{DEMO / "transcripts"}"\n'
    )
    return config


def main() -> int:
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_run")
    config = write_config(target)
    code = cli_main(["run", str(config)])
    if code == 0:
        print(f"\nworkspace: {target / 'workspace'}")
        print(f"report:    {target / 'workspace' / 'report.json'}")
    return code


if __name__ == "__main__":
    sys.exit(main())
