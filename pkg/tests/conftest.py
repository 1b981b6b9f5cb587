import os

import hypothesis
import numpy as np
import pytest

from qbdmanet.params import build_params

hypothesis.settings.register_profile("default", max_examples=40, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=400, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

np.seterr(all="raise", under="ignore")


@pytest.fixture
def small_params():
    # alpha = 8 = m, so a single cell is active per slot
    return build_params(20, 8, 0.3).with_load(0.5)


@pytest.fixture
def out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("QBDMANET_OUTPUT_DIR", str(tmp_path / "env_out"))
    return tmp_path


_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record a one-line pass/fail verdict for an acceptance criterion."""
    def record(number: int, name: str, ok: bool, detail: str = "") -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {name}" + (f" ({detail})" if detail else "")
        _VERDICTS.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
