import os

import numpy as np
import pytest

from advexplain import dataset as ds
from advexplain import synthetic
from advexplain.model import ClassifierModel
from advexplain.trainer import TrainConfig, train

FIXTURES = os.path.join(os.path.dirname(os.path.abspath(__file__)), "fixtures")


def fixture_path(*parts):
    return os.path.join(FIXTURES, *parts)


@pytest.fixture(scope="session")
def fixture_splits():
    """Datasets built from the shipped synthetic fixture files."""
    return ds.build_datasets(ds.read_records(fixture_path("train.txt")),
                             ds.read_records(fixture_path("test.txt")))


@pytest.fixture(scope="session")
def synthetic_splits():
    tr = ds.parse_records(synthetic.generate_lines(4000, seed=1))
    te = ds.parse_records(synthetic.generate_lines(1500, seed=2, extra_services=("urp_i",)))
    return ds.build_datasets(tr, te)


@pytest.fixture(scope="session")
def synthetic_mlp(synthetic_splits):
    train_ds, _ = synthetic_splits
    model = ClassifierModel.mlp(train_ds.schema.encoded_dim, seed=42)
    model, _ = train(model, train_ds, TrainConfig(max_epochs=40))
    return model


@pytest.fixture
def rng():
    return np.random.default_rng(0)


# -- acceptance summary ---------------------------------------------------------
# Tests marked ``criterion(key, title)`` get one PASS/FAIL/SKIP line in the
# terminal summary; a ``measured`` record_property is appended to it.

ACCEPTANCE = {}
_RANK = {"PASS": 0, "SKIP": 1, "FAIL": 2}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(key, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not (rep.when == "call" or rep.outcome != "passed"):
        return
    key, title = marker.args
    status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[rep.outcome]
    if rep.skipped and isinstance(rep.longrepr, tuple):
        detail = rep.longrepr[2].removeprefix("Skipped: ")
    else:
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "measured")
    prev = ACCEPTANCE.get(key)
    if prev is None or _RANK[status] > _RANK[prev[1]]:
        ACCEPTANCE[key] = (title, status, detail)


def _key_order(key):
    head, _, tail = str(key).partition("-")
    return (int(head), tail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=_key_order):
        title, status, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{status}] criterion {key}: {title}" + (f" -- {detail}" if detail else ""))
