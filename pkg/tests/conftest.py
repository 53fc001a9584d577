import warnings

import pytest

# numba prints a TBB version notice on import in some environments
warnings.filterwarnings("ignore", module="numba")

from sbmkit.bernstein import BernsteinFamily, SubordinatorModel  # noqa: E402

FAMILIES = {
    "stable": ("stable", 1.0, None),
    "relativistic": ("relativistic", 1.0, None),
    "mixture": ("mixture", 1.0, 0.5),
    "logpos": ("logpos", 1.0, 0.5),
    "logneg": ("logneg", 1.0, 0.5),
}


def family(name):
    return BernsteinFamily(*FAMILIES[name])


def model(name):
    return SubordinatorModel(family(name))


@pytest.fixture(params=sorted(FAMILIES))
def any_family(request):
    return family(request.param)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
