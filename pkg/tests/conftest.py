import copy

import pytest
import yaml

from uavmission.scenario import config_from_dict, default_scenario_path, run_scenario


@pytest.fixture(scope="session")
def canonical_raw():
    with open(default_scenario_path(), encoding="utf-8") as fh:
        return yaml.safe_load(fh)


@pytest.fixture(scope="session")
def canonical_run(tmp_path_factory):
    """The shipped scenario flown once, with its run directory on disk."""
    out = tmp_path_factory.mktemp("canonical")
    return run_scenario(default_scenario_path(), out)


@pytest.fixture
def variant(canonical_raw):
    """Build and fly a modified copy of the canonical scenario."""
    def run(mutate, out_dir=None):
        d = copy.deepcopy(canonical_raw)
        mutate(d)
        return run_scenario(config_from_dict(d), out_dir)

    return run


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion check")
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not rep.failed:
        return
    number, title = mark.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    if rep.when == "call" or number not in item.config._criteria:
        item.config._criteria[number] = (title, rep.passed, detail)


def pytest_terminal_summary(terminalreporter, config):
    if not config._criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(config._criteria):
        title, passed, detail = config._criteria[number]
        line = f"[{'PASS' if passed else 'FAIL'}] {number}. {title}"
        terminalreporter.write_line(f"{line}: {detail}" if detail else line)
