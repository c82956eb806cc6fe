#!/usr/bin/env python3
"""Script to run a scenario locally.

Runs every bundled scenario when none is given, writing reports to the output directory.
"""

import sys
from pathlib import Path

# Add parent directory to path to import app modules
sys.path.insert(0, str(Path(__file__).parent.parent))

from app.cli import main
from app.services.harness import bundled_scenarios
from app.utils.logger import logger


def run_all() -> int:
    """Run every bundled scenario; returns the worst exit code."""
    worst = 0
    for name in bundled_scenarios():
        logger.info(f"Running bundled scenario {name}")
        worst = max(worst, main(["run", name]))
    return worst


if __name__ == "__main__":
    if len(sys.argv) > 1:
        sys.exit(main(["run", *sys.argv[1:]]))
    sys.exit(run_all())
