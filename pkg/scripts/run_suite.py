#!/usr/bin/env python3
"""Run the full scenario battery and print the per-scenario summary.

Equivalent to `equifix suite`; kept as a script so the battery can be run
straight from a checkout.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from equifix.cli import main

if __name__ == "__main__":
    sys.exit(main(["suite"] + sys.argv[1:]))
