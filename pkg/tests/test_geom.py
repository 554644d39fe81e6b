import math

import numpy as np
import pytest
from scipy import stats

from specvae.errors import MeshParseError, ValidationError
from specvae.geom import TriMesh, load_mesh, load_ply, quat, rotate_cloud, sample_surface, save_obj, save_off, save_ply
from specvae.geom.shapes import icosahedron, icosphere


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_single_triangle_off(tmp_path):
    m = load_mesh(write(tmp_path, "t.off", "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n"))
    assert (m.n_vertices, m.n_triangles) == (3, 1)


def test_off_index_out_of_range(tmp_path):
    with pytest.raises(ValidationError, match="out of range"):
        load_mesh(write(tmp_path, "t.off", "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 99\n"))


def test_off_parse_error_has_line(tmp_path):
    with pytest.raises(MeshParseError) as exc:
        load_mesh(write(tmp_path, "t.off", "OFF\n3 1 0\n0 0 0\n1 x 0\n0 1 0\n3 0 1 2\n"))
    assert exc.value.line == 4


def test_icosahedron_area_roundtrip(tmp_path):
    ico = icosahedron()
    save_off(ico, tmp_path / "ico.off")
    m = load_mesh(tmp_path / "ico.off")
    assert (m.n_vertices, m.n_triangles) == (12, 20)
    a = np.linalg.norm(m.vertices[m.triangles[0, 0]] - m.vertices[m.triangles[0, 1]])
    assert m.area() == pytest.approx(5 * math.sqrt(3) * a * a, rel=1e-12)


def test_obj_roundtrip_and_ignored_directives(tmp_path, caplog):
    ico = icosahedron()
    save_obj(ico, tmp_path / "ico.obj")
    text = "# comment\nvn 0 0 1\n" + (tmp_path / "ico.obj").read_text()
    with caplog.at_level("WARNING"):
        m = load_mesh(write(tmp_path, "b.obj", text))
    assert "ignored OBJ directives" in caplog.text
    np.testing.assert_array_equal(m.vertices, ico.vertices)
    np.testing.assert_array_equal(m.triangles, ico.triangles)


def test_degenerate_and_duplicate_rejected():
    v = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 1, 0]], float)
    with pytest.raises(ValidationError, match="degenerate"):
        TriMesh(v, [[0, 1, 2]])
    with pytest.raises(ValidationError, match="duplicate"):
        TriMesh(v, [[0, 1, 3], [3, 0, 1]])


def test_sample_inside_triangle():
    m = TriMesh(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], float), [[0, 1, 2]])
    p = sample_surface(m, 1000, 0)
    assert np.abs(p[:, 2]).max() < 1e-12
    assert (p[:, 0] >= -1e-12).all() and (p[:, 1] >= -1e-12).all() and (p.sum(1)[:, None] <= 1 + 1e-12).all()


def test_sample_area_proportional():
    # areas 1 and 3
    v = np.array([[0, 0, 0], [2, 0, 0], [0, 1, 0], [10, 0, 0], [13, 0, 0], [10, 2, 0]], float)
    m = TriMesh(v, [[0, 1, 2], [3, 4, 5]])
    _, faces = sample_surface(m, 40000, 7, return_faces=True)
    counts = np.bincount(faces, minlength=2)
    sd = math.sqrt(40000 * 0.25 * 0.75)
    assert abs(counts[0] - 10000) < 3 * sd


def test_sample_chi_square():
    m = icosphere(2)
    _, faces = sample_surface(m, 100000, 3, return_faces=True)
    expected = 100000 * m.areas() / m.area()
    p = stats.chisquare(np.bincount(faces, minlength=m.n_triangles), expected).pvalue
    assert p > 0.001


def test_sample_deterministic():
    m = icosphere(1)
    np.testing.assert_array_equal(sample_surface(m, 100, 5), sample_surface(m, 100, 5))


def test_quat_matrix_examples():
    np.testing.assert_allclose(quat.to_matrix([1, 0, 0, 0]), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(quat.to_matrix([0, 0, 0, 1]), np.diag([-1.0, -1.0, 1.0]), atol=1e-15)
    q = np.array([0.3, -0.2, 0.9, 0.1])
    np.testing.assert_array_equal(quat.to_matrix(q), quat.to_matrix(-q))


def test_quat_matrix_orthogonal(rng):
    for q in rng.standard_normal((50, 4)):
        r = quat.to_matrix(q)
        np.testing.assert_allclose(r.T @ r, np.eye(3), atol=1e-9)
        assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-9)


def test_quat_distance():
    q = quat.normalize([0.5, 0.1, -0.3, 0.8])
    assert quat.distance(q, q) == pytest.approx(0.0, abs=1e-15)
    assert quat.distance(q, -q) == pytest.approx(0.0, abs=1e-15)
    assert quat.distance([1, 0, 0, 0], [0, 1, 0, 0]) == 1.0
    p = quat.normalize([0.1, 0.7, 0.2, -0.1])
    assert quat.distance(q, p) == quat.distance(p, q)


def test_zero_quaternion_rejected():
    with pytest.raises(ValidationError):
        quat.normalize([0, 0, 0, 0])


def test_rotate_cloud(rng):
    pts = rng.standard_normal((30, 3))
    np.testing.assert_allclose(rotate_cloud(pts, [1, 0, 0, 0]), pts, atol=0)
    np.testing.assert_allclose(rotate_cloud([[1.0, 0, 0]], [0, 0, 0, 1]), [[-1.0, 0, 0]], atol=1e-12)
    q = quat.normalize(rng.standard_normal(4))
    back = rotate_cloud(rotate_cloud(pts, q), quat.inverse(q))
    np.testing.assert_allclose(back, pts, atol=1e-9)
    d0 = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    r = rotate_cloud(pts, q)
    np.testing.assert_allclose(np.linalg.norm(r[:, None] - r[None], axis=-1), d0, atol=1e-9)


def test_rotate_compose(rng):
    pts = rng.standard_normal((10, 3))
    a, b = quat.normalize(rng.standard_normal((2, 4)))
    np.testing.assert_allclose(rotate_cloud(rotate_cloud(pts, a), b), rotate_cloud(pts, quat.multiply(a, b)), atol=1e-12)


def test_random_height_rotation():
    np.testing.assert_allclose(quat.random_height_rotation((0, 0), 1), [1, 0, 0, 0], atol=1e-15)
    np.testing.assert_allclose(quat.random_height_rotation((math.pi, math.pi), 1), [0, 0, 1, 0], atol=1e-15)
    qs = quat.random_height_rotation((0, 2 * math.pi), 2, size=10000)
    ang = (2 * np.arctan2(qs[:, 2], qs[:, 0])) % (2 * math.pi)
    assert abs(ang.mean() - math.pi) < 3 * (2 * math.pi / math.sqrt(12)) / 100
    assert quat.rotation_angle(qs).max() <= math.pi


def test_ply_roundtrip(tmp_path, rng):
    pts = rng.standard_normal((20, 3))
    save_ply(pts, tmp_path / "a.ply")
    back, depth = load_ply(tmp_path / "a.ply")
    np.testing.assert_allclose(back, pts, rtol=1e-8)
    np.testing.assert_allclose(depth, pts[:, 2], rtol=1e-8)
