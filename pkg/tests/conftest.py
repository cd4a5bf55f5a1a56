"""Shared fixtures and the acceptance-criteria reporter."""

import numpy as np
import pytest

import aialab as al

# frozen desk fixtures; the generating seeds were picked once and verified,
# everything downstream is deterministic

HOMOPHILOUS_BINARY = dict(num_nodes=200, num_features=8, num_classes=2,
                          p_in=0.25, p_out=0.0, name="homophilous-bin")
HOMOPHILOUS_BINARY_SEED = 0

HOMOPHILOUS_CONTINUOUS = dict(num_nodes=200, num_features=6, num_classes=2,
                              p_in=0.2, p_out=0.0, feature_kind="continuous",
                              noise_scale=0.3, name="homophilous-cont")
HOMOPHILOUS_CONTINUOUS_SEED = 3


@pytest.fixture(scope="session")
def binary_ds():
    return al.generate_synthetic(al.SyntheticSpec(**HOMOPHILOUS_BINARY),
                                 seed=HOMOPHILOUS_BINARY_SEED)


@pytest.fixture(scope="session")
def binary_setup(binary_ds):
    """Dataset, split and setting-1 mask on sensitive column 0."""
    split = al.make_split(binary_ds, 150, 100, seed=0,
                          candidate_seed=HOMOPHILOUS_BINARY_SEED)
    x = al.mask_sensitive(binary_ds, split, [0], "setting1", seed=0)
    return binary_ds, split, x


@pytest.fixture(scope="session")
def trained_model(binary_setup):
    ds, split, _ = binary_setup
    return al.train_gcn(ds, split, {"seed": 0})


@pytest.fixture(scope="session")
def continuous_ds():
    return al.generate_synthetic(al.SyntheticSpec(**HOMOPHILOUS_CONTINUOUS),
                                 seed=HOMOPHILOUS_CONTINUOUS_SEED)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)


# -- acceptance reporting ----------------------------------------------------

_criterion_results = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(num, title): one numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    num, title = mark.args
    if rep.when == "setup" and rep.skipped:
        reason = rep.longrepr[2] if isinstance(rep.longrepr, tuple) else str(rep.longrepr)
        reason = reason.replace("Skipped: ", "")
        _criterion_results[num] = (title, f"SKIP ({reason})")
    elif rep.when == "call":
        if rep.passed:
            _criterion_results[num] = (title, "PASS")
        elif rep.skipped:
            reason = rep.longrepr[2] if isinstance(rep.longrepr, tuple) else str(rep.longrepr)
            reason = reason.replace("Skipped: ", "")
            _criterion_results[num] = (title, f"SKIP ({reason})")
        else:
            _criterion_results[num] = (title, "FAIL")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criterion_results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criterion_results):
        title, status = _criterion_results[num]
        terminalreporter.write_line(f"criterion {num:2d}: {status} - {title}")
