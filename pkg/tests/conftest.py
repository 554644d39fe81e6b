import time

import numpy as np
import pytest

from specvae.config import Config, DataConfig

# acceptance results, printed at the end of the session
ACCEPTANCE = {}

SEEDS = (0, 1, 2)
ABLATION = {"penalty.gamma_i": 0.0, "penalty.w_j": 0.0}


def record(n, ok, detail):
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """16 capsules, 4 held out; fast enough for unit tests."""
    from specvae.data import build_dataset, load_dataset
    root = tmp_path_factory.mktemp("ds16")
    build_dataset(DataConfig(n_shapes=16, n_test=4, n_points=256, n_classes=4), root, 5)
    return load_dataset(root)


@pytest.fixture(scope="session")
def capsule_runs(tmp_path_factory):
    """The 512-capsule set plus AE, default VAE and ablation VAE for three seeds."""
    from specvae.data import build_dataset, load_dataset
    from specvae.train import train_ae, train_vae

    t0 = time.perf_counter()
    root = tmp_path_factory.mktemp("capsules")
    build_dataset(DataConfig(), root / "data", 0)
    ds = load_dataset(root / "data")
    runs = {}
    for seed in SEEDS:
        cfg = Config().override({"seed": seed})
        ae, _ = train_ae(ds, cfg, root / f"s{seed}")
        vae, rows = train_vae(ds, ae, cfg, root / f"s{seed}" / "default")
        cfg_ab = cfg.override(ABLATION)
        vae_ab, rows_ab = train_vae(ds, ae, cfg_ab, root / f"s{seed}" / "ablation")
        runs[seed] = {"cfg": cfg, "ae": ae, "vae": vae, "rows": rows, "vae_ab": vae_ab, "rows_ab": rows_ab,
                      "dir": root / f"s{seed}"}
    return {"ds": ds, "runs": runs, "seconds": time.perf_counter() - t0, "root": root}
