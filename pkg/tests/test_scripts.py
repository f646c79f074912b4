import subprocess
import sys
from pathlib import Path

import pytest

SCRIPTS = Path(__file__).resolve().parent.parent / "scripts"


@pytest.mark.parametrize("argv", [
    ["run_simulation.py", "--seed", "3", "--steps", "400"],
    ["generate_mbt_suite.py", "validate_transaction"],
    ["monitor_fault_injection.py", "--steps", "300", "--index", "150"],
])
def test_script_runs(argv):
    res = subprocess.run([sys.executable, str(SCRIPTS / argv[0]), *argv[1:]], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert res.stdout
