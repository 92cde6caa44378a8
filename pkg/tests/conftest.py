import pytest

from arrayheal.config import PipelineConfig
from arrayheal.pipeline import analyze
from arrayheal.simulation import paper_twin_scenario

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    title = dict(report.user_properties).get("criterion")
    if title is None:
        return
    number, name = title
    _criteria[number] = (name, "PASS" if report.passed else "FAIL")


def pytest_runtest_setup(item):
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        item.user_properties.append(("criterion", marker.args))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        name, status = _criteria[number]
        terminalreporter.write_line(f"criterion {number}: {status}  {name}")


@pytest.fixture(scope="session")
def paper_run():
    return analyze(PipelineConfig(paper_twin_scenario(seed=0)))


@pytest.fixture(scope="session")
def quiet_run():
    return analyze(PipelineConfig(paper_twin_scenario(seed=0, drift=False)))


@pytest.fixture(scope="session")
def cli_tree(tmp_path_factory):
    """Output tree of one full ``all`` run on the default scenario."""
    from arrayheal.cli import main

    out = tmp_path_factory.mktemp("cli") / "run"
    assert main(["all", "--out", str(out)]) == 0
    return out
