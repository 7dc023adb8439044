"""Run the rocf CLI from a source checkout.

Usage:
    python scripts/rocf.py run --config configs/synthetic.toml
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))


if __name__ == "__main__":
    from src.cli import main

    raise SystemExit(main())
