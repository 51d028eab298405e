import subprocess
import sys
from pathlib import Path

import pytest

TOOLS = Path(__file__).resolve().parent.parent / "tools"


@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory) -> Path:
    """A tiny TorchScript artifact built by the shipped tool, window 96."""
    path = tmp_path_factory.mktemp("ckpt") / "tiny.pt"
    proc = subprocess.run(
        [sys.executable, str(TOOLS / "make_test_checkpoint.py"), str(path), "--seed", "7"],
        capture_output=True, text=True,
    )
    if proc.returncode != 0:
        raise RuntimeError(f"checkpoint build failed:\n{proc.stderr}")
    return path
