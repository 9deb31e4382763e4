import pytest

from mivcellkit.device_model import ModelConstants, ModelParams
from mivcellkit.extraction import read_bounds
from mivcellkit.fixtures import default_bounds_path, load_fixture_models


@pytest.fixture(scope="session")
def models():
    return load_fixture_models()


@pytest.fixture(scope="session")
def bounds():
    return read_bounds(default_bounds_path())


@pytest.fixture(scope="session")
def consts():
    return ModelConstants()


@pytest.fixture(scope="session")
def nmos():
    """A hand-written n-type card, independent of the shipped fixtures."""
    return ModelParams(
        vth0=0.3, delvt=0.0, u0=0.02, ua=0.3, ub=0.05, ud=0.02, ucs=1.5,
        cdsc=0.12, cdscd=0.03, dvt0=0.15, dvt1=0.6, etab=0.06, vsat=9e4,
        pvag=0.15, ckappa=0.6, cf=2e-17, cgso=1.5e-10, cgdo=1.5e-10,
        cgsl=5e-11, cgdl=5e-11, moin=6.0,
    )


@pytest.fixture(scope="session")
def pmos(nmos):
    return nmos.replace(polarity="p", vth0=0.32, u0=0.012)


_VERDICTS = []


@pytest.fixture
def verdict(request):
    """Record one acceptance line; a test that errors before recording is a FAIL."""
    seen = []

    def record(number, title, ok, detail=""):
        seen.append(number)
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}" + (f" ({detail})" if detail else "")
        _VERDICTS.append((number, line))
        print(line)

    yield record
    if not seen:
        _VERDICTS.append((0, f"{request.node.name} FAIL: errored before a verdict"))


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_VERDICTS):
            terminalreporter.write_line(line)
