import os
import time

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("suite", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "suite"))

# criterion number -> (passed, detail); filled by the acceptance tests
ACCEPTANCE = {}
SUITE_BUDGET_S = 120.0


def pytest_sessionstart(session):
    session.config._t_start = time.perf_counter()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


@pytest.fixture
def criterion(request):
    """Records one acceptance line: ``criterion["n"]`` and ``criterion["detail"]``."""
    rec = {"detail": ""}
    yield rec
    rep = getattr(request.node, "rep_call", None)
    passed = rep is not None and rep.passed
    ACCEPTANCE[rec["n"]] = (passed, rec["detail"])


def _whole_suite(config) -> bool:
    return not (config.option.keyword or config.option.markexpr or config.option.lf)


def pytest_sessionfinish(session, exitstatus):
    elapsed = time.perf_counter() - session.config._t_start
    session.config._t_elapsed = elapsed
    if ACCEPTANCE and _whole_suite(session.config) and session.testscollected > len(ACCEPTANCE):
        if elapsed > SUITE_BUDGET_S and session.exitstatus == 0:
            session.exitstatus = 1


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[n]
        tr.write_line(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
    elapsed = getattr(config, "_t_elapsed", float("nan"))
    if _whole_suite(config):
        ok = elapsed <= SUITE_BUDGET_S
        tr.write_line(f"suite runtime: {elapsed:.1f} s (budget {SUITE_BUDGET_S:.0f} s) "
                      f"{'PASS' if ok else 'FAIL'}")


@pytest.fixture(scope="session")
def swing_trace():
    from wireleg.harness.config import builtin_config
    from wireleg.harness.experiments import run_swing_experiment
    cfg = builtin_config("swing")
    return run_swing_experiment(cfg.scenario, cfg.swing)


@pytest.fixture(scope="session")
def impact_config():
    from wireleg.harness.config import builtin_config
    return builtin_config("impact")


@pytest.fixture(scope="session")
def impact_run(impact_config):
    from wireleg.harness.experiments import run_impact_experiment
    return run_impact_experiment(impact_config.scenario, impact_config.impact)
