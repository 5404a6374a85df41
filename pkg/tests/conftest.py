import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

REPO_ROOT = Path(__file__).resolve().parent.parent


def data_dir() -> Path:
    return Path(os.environ.get("CPDETECT_DATA_DIR", REPO_ROOT / "data"))


def require_dataset(name: str, hint: str) -> Path:
    path = data_dir() / name
    if not path.exists():
        pytest.skip(
            f"dataset {name} not present under {data_dir()} "
            f"(set CPDETECT_DATA_DIR or see data/README.md; {hint})"
        )
    return path


@pytest.fixture
def tmp_config(tmp_path):
    def write(text: str, name: str = "run.cfg") -> Path:
        path = tmp_path / name
        path.write_text(text)
        return path

    return write
