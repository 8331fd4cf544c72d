import time

import numpy as np
import pytest
from hypothesis import settings

from fewshotkit.backbone import PretrainConfig, pretrain
from fewshotkit.cli.commands import seeds
from fewshotkit.cli.config import RunConfig
from fewshotkit.datakit import SyntheticSpec, make_synthetic, mint_episodes, split_classes
from fewshotkit.fewshot import METHODS, evaluate_episode
from fewshotkit.ndgrad import kernels

settings.register_profile("repro", derandomize=True)
settings.load_profile("repro")

BACKENDS = ["python"] + (["cython"] if kernels.compiled_available() else [])

# The acceptance dataset is the one the CLI builds from its default config:
# 100 Gaussian classes in 16-d with a 60/20/20 class split.
ACCEPT_CFG = RunConfig()
ACCEPT_SEEDS = seeds(ACCEPT_CFG)


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run the test once per available kernel backend."""
    impl = kernels.get_backend(request.param)
    for name in kernels.KERNEL_NAMES:
        monkeypatch.setattr(kernels, name, getattr(impl, name))
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def accept_data():
    d = ACCEPT_CFG.data
    spec = SyntheticSpec(d.n_classes, d.dim, d.samples_per_class, d.center_scale,
                         d.noise_sigma, ACCEPT_SEEDS["data"], d.name)
    ds = make_synthetic(spec)
    return ds, split_classes(ds, ACCEPT_CFG.split.fractions, ACCEPT_SEEDS["split"])


@pytest.fixture(scope="session")
def accept_backbone(accept_data):
    ds, split = accept_data
    pool = split.part(ACCEPT_CFG.split.pool)
    return pretrain(ds, pool, ACCEPT_CFG.pretrain_config(ACCEPT_SEEDS["pretrain"]))


def accept_episodes(data, way, shot, n, stream="episodes"):
    ds, split = data
    return mint_episodes(ds, split.test, way, shot, ACCEPT_CFG.eval.query_shot, n,
                         ACCEPT_SEEDS["episodes"], stream=stream)


@pytest.fixture(scope="session")
def accept_table(accept_data, accept_backbone):
    """200 seeded 1-shot 5-way episodes scored by every method, plus wall time."""
    t0 = time.perf_counter()
    eps = accept_episodes(accept_data, 5, 1, 200)
    theta = accept_backbone.params
    res = {m: [evaluate_episode(theta, ep, m, ACCEPT_CFG.adapt) for ep in eps]
           for m in METHODS}
    return res, time.perf_counter() - t0


@pytest.fixture(scope="session")
def small_data():
    ds = make_synthetic(SyntheticSpec(n_classes=30, dim=8, samples_per_class=30,
                                      center_scale=1.5, noise_sigma=1.0, seed=5))
    return ds, split_classes(ds, (0.6, 0.2, 0.2), 6)


@pytest.fixture(scope="session")
def small_backbone(small_data):
    ds, split = small_data
    cfg = PretrainConfig(hidden=(32, 32), cycles=(2, 4), batch_size=64, seed=7)
    return pretrain(ds, split.train, cfg)


# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} [{num:>2}] {title}: {detail}")
