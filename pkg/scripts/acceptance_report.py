"""Run the acceptance suite and print one PASS/FAIL line per criterion.

    python3 scripts/acceptance_report.py
"""

import pathlib
import sys

import pytest

ROOT = pathlib.Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    code = pytest.main([str(ROOT / "tests" / "test_acceptance.py"), "-q", "-p", "no:cacheprovider"])
    sys.exit(int(code))
