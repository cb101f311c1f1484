import numpy as np
import pytest


def random_density_matrix(rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    m = z @ z.conj().T
    return m / np.trace(m).real


def random_hermitian(rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    return 0.5 * (z + z.conj().T)


def trace_distance(a, b) -> float:
    return 0.5 * float(np.abs(np.linalg.eigvalsh(np.asarray(a) - np.asarray(b))).sum())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance criteria: one PASS/FAIL line each in the terminal summary
_ACCEPTANCE: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    report = (yield).get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and not report.failed):
        return
    number, title = marker.args
    entry = _ACCEPTANCE.setdefault(number, {"title": title, "failed": False, "seconds": 0.0})
    entry["failed"] |= not report.passed
    entry["seconds"] += call.duration


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        e = _ACCEPTANCE[number]
        status = "FAIL" if e["failed"] else "PASS"
        terminalreporter.write_line(f"criterion {number}: {status} {e['title']} ({e['seconds']:.2f} s)")
