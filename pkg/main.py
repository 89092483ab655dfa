#!/usr/bin/env python3
"""
ILLUM toolchain entry point
"""

import sys
from pathlib import Path

from dotenv import load_dotenv

# Add the backend to the Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root / "backend"))

# Load environment variables before the settings object is built
load_dotenv()

from illum.api.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
