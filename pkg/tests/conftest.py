from __future__ import annotations

import pytest

from scaudit.corpus import generate


@pytest.fixture(scope="session")
def corpus42():
    return generate(42, 5)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    """One visible pass/fail line per acceptance criterion."""
    outcome = yield
    report = outcome.get_result()
    if report.when != "call" or "test_acceptance" not in str(item.fspath):
        return
    name = item.function.__doc__ or item.name
    status = "PASS" if report.passed else "FAIL"
    print(f"\nACCEPTANCE {status}: {name.strip().splitlines()[0]}")
