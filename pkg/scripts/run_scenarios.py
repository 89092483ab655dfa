#!/usr/bin/env python3
"""
Replay every bundled scenario and check the runs it produces
"""

import sys
from pathlib import Path

# Add the backend directory to the Python path
backend_dir = Path(__file__).parent.parent / "backend"
sys.path.insert(0, str(backend_dir))

from illum.core.config import configure_logging
from illum.core.errors import IllumError
from illum.services.coherence import check_balance_preservation, check_coherence
from illum.services.scenarios import load_scenario, run_scenario


def replay(path: Path, seed: int) -> bool:
    """Replay one scenario; True when both checks pass"""
    try:
        result = run_scenario(load_scenario(path), seed, base_dir=path.parent)
    except IllumError as e:
        print(f"❌ {path.name}: {e.code}: {e.message}")
        return False
    coherent = check_coherence(result.symbolic, result.computational, result.maps, result.program)
    balanced = check_balance_preservation(result.symbolic, result.computational, result.maps)
    if coherent and balanced:
        print(f"✅ {path.name}: {len(result.symbolic)} actions, {len(result.computational)} labels")
        return True
    print(f"❌ {path.name}: coherent={bool(coherent)} balanced={bool(balanced)}")
    return False


def main() -> int:
    configure_logging("WARNING")
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
    scenarios = sorted((Path(__file__).parent.parent / "data" / "scenarios").glob("*.json"))
    print(f"🔁 Replaying {len(scenarios)} scenarios with seed {seed}...")
    results = [replay(path, seed) for path in scenarios]
    return 0 if all(results) else 1


if __name__ == "__main__":
    sys.exit(main())
