import pytest

from qpmdesign.qpm import SpdcProcess, solve_poling_period


@pytest.fixture(scope="session")
def ktp791():
    """Degenerate type-II ppKTP at 791 nm, 30 mm."""
    period = solve_poling_period("KTP", "o:oe", 0.791, 1.582)
    return SpdcProcess("KTP", "o:oe", 0.791, 1.582, period=period, order=-1, length_mm=30.0)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(test_acceptance.RESULTS.items()):
            terminalreporter.write_line(line)
