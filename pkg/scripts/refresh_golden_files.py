#!/usr/bin/env python3
"""
Regenerate the golden embodiment masks in tests/data/golden.

Removes the stored PBM files and runs the golden tests once with
MASKWORLD_REFRESH_GOLDEN=1, which writes fresh copies. Run this only after
an intended change to the renderer or to the bundled URDF fixtures, and
review the new masks before committing them.
"""

import os
import sys
import subprocess
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

PROJECT_ROOT = Path(__file__).parent.parent
GOLDEN_DIR = PROJECT_ROOT / "tests" / "data" / "golden"


def remove_golden_files():
    """Delete the current golden masks and return how many were removed."""
    files = sorted(GOLDEN_DIR.glob("*.pbm"))
    for path in files:
        print(f"🗑️  Removing {path.name}")
        path.unlink()
    return len(files)


def write_golden_files():
    """Run the golden tests in refresh mode, which writes fresh copies."""
    env = {**os.environ, "MASKWORLD_REFRESH_GOLDEN": "1"}
    cmd = [sys.executable, "-m", "pytest", "-m", "golden", "-q", "tests/render/test_golden_masks.py"]
    print(f"📝 Running: {' '.join(cmd[2:])}")
    result = subprocess.run(cmd, capture_output=True, text=True, cwd=PROJECT_ROOT, env=env)
    if result.stdout:
        print(result.stdout)
    if result.stderr:
        print("⚠️  Errors/Warnings:")
        print(result.stderr)
    return result.returncode == 0


def main():
    """Main function."""
    removed = remove_golden_files()
    print(f"🔄 Removed {removed} golden files")
    if not write_golden_files():
        print("❌ Golden tests failed")
        return 1
    written = sorted(GOLDEN_DIR.glob("*.pbm"))
    print(f"✅ Wrote {len(written)} golden files to {GOLDEN_DIR}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
