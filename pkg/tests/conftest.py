import numpy as np
import pytest

from isacough.audio_io import AudioBuffer


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def sine_48k():
    sr = 48000
    t = np.arange(sr) / sr
    return AudioBuffer(0.5 * np.sin(2 * np.pi * 1000.0 * t), sr)


_acceptance: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _acceptance[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict in sorted(_acceptance.items()):
        terminalreporter.write_line(f"{verdict}  {name}")
