import math

import numpy as np
import pytest

from specvae.config import DataConfig
from specvae.data import (
    CapsuleParams,
    build_dataset,
    capsule_area,
    capsule_mesh,
    heightfield_mesh,
    load_dataset,
    read_cloud,
    read_manifest,
    read_pgm,
    write_cloud,
    write_pgm,
)
from specvae.errors import MeshParseError, ValidationError
from specvae.spectral import mesh_spectrum

TINY = DataConfig(n_shapes=8, n_test=2, n_points=128, n_lambda=10, n_classes=3)


def test_heightfield_all_zero():
    with pytest.raises(ValidationError):
        heightfield_mesh(np.zeros((4, 4)))


def test_heightfield_all_ones():
    m = heightfield_mesh(np.ones((3, 3)))
    assert (m.n_vertices, m.n_triangles) == (9, 8)
    assert m.vertices[:, 2].max() == pytest.approx(0.1)


def test_heightfield_largest_component():
    img = np.zeros((12, 20))
    img[1:9, 1:6] = 1.0        # 40 pixels
    img[2:5, 12:15] = 0.5      # 9 pixels
    m = heightfield_mesh(img)
    assert m.n_vertices == 40
    assert m.vertices[:, 0].max() < 12 / 20


def test_heightfield_too_small():
    with pytest.raises(ValidationError):
        heightfield_mesh(np.ones((1, 5)))


def test_pgm_roundtrip(tmp_path, rng):
    img = rng.integers(0, 256, (5, 7)) / 255.0
    write_pgm(tmp_path / "a.pgm", img)
    np.testing.assert_allclose(read_pgm(tmp_path / "a.pgm"), img, atol=1e-12)
    (tmp_path / "b.pgm").write_text("P2\n# note\n3 2\n10\n0 5 10\n10 5 0\n")
    np.testing.assert_allclose(read_pgm(tmp_path / "b.pgm"), [[0, 0.5, 1], [1, 0.5, 0]])
    (tmp_path / "c.pgm").write_text("P2\n3 2\n10\n0 5\n")
    with pytest.raises(MeshParseError):
        read_pgm(tmp_path / "c.pgm")


def test_capsule_area_independent_of_pose():
    straight = capsule_mesh(CapsuleParams((1.0, 1.2, 1.1), 0.1, (0.0, 0.0)))[0]
    bent = capsule_mesh(CapsuleParams((1.0, 1.2, 1.1), 0.1, (0.9, -1.1)))[0]
    assert bent.area() == pytest.approx(straight.area(), rel=0.005)
    assert straight.area() == pytest.approx(capsule_area((1.0, 1.2, 1.1), 0.1), rel=0.02)


def test_capsule_thicker_is_bigger_and_lower():
    thin = capsule_mesh(CapsuleParams((1.0, 1.0), 0.08, (0.0,)))[0]
    thick = capsule_mesh(CapsuleParams((1.0, 1.0), 0.16, (0.0,)))[0]
    assert thick.area() > thin.area()
    assert mesh_spectrum(thick, 1).values[0] < mesh_spectrum(thin, 1).values[0]


def test_capsule_ground_truth():
    p = CapsuleParams((1.0, 1.2, 1.1), 0.1, (0.3, -0.5))
    _, beta, theta = capsule_mesh(p)
    np.testing.assert_array_equal(beta, [1.0, 1.2, 1.1, 0.1])
    np.testing.assert_array_equal(theta, [[0, 0, 0.3], [0, 0, -0.5]])


def test_capsule_near_isometry():
    a = mesh_spectrum(capsule_mesh(CapsuleParams((1.0, 1.1, 1.0), 0.08, (0.0, 0.0)))[0], 20).values
    b = mesh_spectrum(capsule_mesh(CapsuleParams((1.0, 1.1, 1.0), 0.08, (0.8, 0.8)))[0], 20).values
    assert np.max(np.abs(b / a - 1)) < 0.02


@pytest.mark.parametrize("kw", [
    {"radius": 0.6},                     # L <= 2r
    {"bends": (1.5, 0.0)},               # beyond bend_max
    {"bends": (0.0,)},                   # wrong count
    {"radius": -0.1},
])
def test_capsule_validation(kw):
    args = {"lengths": (1.0, 1.0, 1.0), "radius": 0.1, "bends": (0.0, 0.0), **kw}
    with pytest.raises(ValidationError):
        CapsuleParams(**args)


def test_cloud_file_roundtrip(tmp_path, rng):
    pts = rng.standard_normal((10, 3))
    write_cloud(tmp_path / "a.pcl", pts)
    np.testing.assert_array_equal(read_cloud(tmp_path / "a.pcl"), pts.astype("<f4"))
    raw = (tmp_path / "a.pcl").read_bytes()
    (tmp_path / "b.pcl").write_bytes(raw[:-4])
    with pytest.raises(ValidationError):
        read_cloud(tmp_path / "b.pcl")


def test_build_tiny(tmp_path):
    manifest = build_dataset(TINY, tmp_path / "a", 3)
    recs = read_manifest(manifest)
    assert len(recs) == 8
    assert all(len(r["spectrum"]) == 10 for r in recs)
    assert sum(r["split"] == "test" for r in recs) == 2
    assert len({r["norm_scale"] for r in recs}) == 1
    build_dataset(TINY, tmp_path / "b", 3)
    assert (tmp_path / "a" / "manifest.jsonl").read_bytes() == (tmp_path / "b" / "manifest.jsonl").read_bytes()
    assert (tmp_path / "a" / "spectra.csv").read_bytes() == (tmp_path / "b" / "spectra.csv").read_bytes()


def test_manifest_roundtrip(small_dataset):
    ds = small_dataset
    recs = read_manifest(ds.root / "manifest.jsonl")
    for i, r in enumerate(recs):
        assert np.array_equal(ds.spectra[i], r["spectrum"])
        assert np.array_equal(ds.beta[i], r["beta"])
        assert np.array_equal(ds.theta[i], r["theta"])
    assert ds.clouds.shape == (16, 256, 3)
    assert len(ds.subset("test")) == 4


def test_normalized_scale(small_dataset):
    ds = small_dataset
    diag = np.linalg.norm(ds.clouds.max(1) - ds.clouds.min(1), axis=1)
    assert diag.max() <= 1.0 + 1e-6


def test_random_replacement_mode(tmp_path):
    cfg = DataConfig(n_shapes=4, n_test=1, n_points=64, n_lambda=8, n_classes=2, noise="random-replacement")
    recs = read_manifest(build_dataset(cfg, tmp_path, 0))
    for r in recs:
        s = np.array(r["spectrum"])
        assert (s >= 0).all() and (np.diff(s) >= 0).all()
    # unrelated to geometry: same class, different draws
    assert recs[0]["spectrum"] != recs[1]["spectrum"]


def test_class_separation(small_dataset):
    ds = small_dataset
    for a in range(len(ds)):
        for b in range(a + 1, len(ds)):
            rel = np.abs(ds.spectra[b] / ds.spectra[a] - 1)
            if ds.labels[a] == ds.labels[b]:
                assert rel.max() < 0.02
            else:
                assert rel[:5].max() > 0.05


def test_missing_manifest(tmp_path):
    with pytest.raises(ValidationError):
        load_dataset(tmp_path)


def test_unit_radius_area_formula():
    assert capsule_area((1.0,), 1.0) == pytest.approx(2 * math.pi + 4 * math.pi)
