"""Capsule dataset generation, manifest and cloud files.

Layout of a built dataset directory::

    manifest.jsonl     one JSON record per shape
    spectra.csv        shape_id, lambda_1..lambda_N
    config.json        the data config used
    meshes/<id>.off    normalized meshes
    clouds/<id>.pcl    cached surface samples

Cloud files are ``b"PCL1"``, a little-endian ``u4`` point count, then the
points as little-endian ``f32`` triplets.

Every mesh is centered on its area centroid and scaled by one dataset-wide
factor. That factor maps the longest straight capsule to unit bounding-box
diagonal. A per-mesh scale would give equal-``beta`` capsules in different
poses different spectra (their bounding boxes differ), which defeats the
point of an articulation-invariant signal.
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import NumericalError, ValidationError
from ..geom.mesh import TriMesh, load_mesh, sample_surface, save_off
from ..rng import make_rng
from ..spectral import mesh_spectrum, pointcloud_spectrum, spectrum_noise
from .capsule import CapsuleParams, capsule_mesh

log = logging.getLogger(__name__)

CLOUD_MAGIC = b"PCL1"
N_SEGMENTS = 3
# intrinsic classes: total lengths on a geometric ladder (eigenvalues scale as
# 1/L^2, so each rung moves the low spectrum by about 12%), with rotating segment
# proportions and radii so every beta component varies
BASE_LENGTH = 2.9
LENGTH_RATIO = 1.06
PROPORTIONS = ((0.36, 0.33, 0.31), (0.31, 0.38, 0.31), (0.30, 0.32, 0.38), (0.34, 0.30, 0.36))
RADII = (0.07, 0.09, 0.11, 0.08, 0.10, 0.075, 0.095, 0.105)
MIN_SEPARATION = 0.05


def write_cloud(path, points):
    pts = np.ascontiguousarray(np.asarray(points), dtype="<f4").reshape(-1, 3)
    with open(path, "wb") as fh:
        fh.write(CLOUD_MAGIC)
        fh.write(len(pts).to_bytes(4, "little"))
        fh.write(pts.tobytes())


def read_cloud(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != CLOUD_MAGIC:
        raise ValidationError(f"{path}: not a cloud file")
    n = int.from_bytes(data[4:8], "little")
    if len(data) != 8 + 12 * n:
        raise ValidationError(f"{path}: expected {n} points, file size {len(data)}")
    return np.frombuffer(data, dtype="<f4", offset=8).reshape(n, 3).astype(np.float64)


def beta_classes(n_classes, n_check=5):
    """Intrinsic parameter sets ``(lengths, radius)``; straight spectra are checked to differ
    by more than ``MIN_SEPARATION`` in at least one of the first ``n_check`` eigenvalues."""
    classes, spectra = [], []
    for k in range(n_classes):
        total = BASE_LENGTH * LENGTH_RATIO ** k
        lengths = tuple(round(float(f * total), 3) for f in PROPORTIONS[k % len(PROPORTIONS)])
        radius = RADII[k % len(RADII)]
        p = CapsuleParams(lengths, radius, (0.0,) * (N_SEGMENTS - 1))
        s = mesh_spectrum(capsule_mesh(p)[0], n_check).values
        for j, t in enumerate(spectra):
            if np.max(np.abs(s / t - 1.0)) <= MIN_SEPARATION:
                raise ValidationError(f"capsule classes {j} and {k} are not spectrally separated")
        classes.append((lengths, radius))
        spectra.append(s)
    return classes


def dataset_scale(classes):
    """Scale mapping the largest straight capsule to unit bounding-box diagonal."""
    diag = 0.0
    for lengths, radius in classes:
        mesh = capsule_mesh(CapsuleParams(lengths, radius, (0.0,) * (len(lengths) - 1)))[0]
        diag = max(diag, mesh.bbox_diagonal())
    return 1.0 / diag


@dataclass
class Dataset:
    """In-memory view of a built dataset."""
    root: Path
    records: list
    clouds: np.ndarray        # (S, N_T, 3)
    spectra: np.ndarray       # (S, N_lambda)
    beta: np.ndarray          # (S, n_beta)
    theta: np.ndarray         # (S, joints, 3)
    labels: np.ndarray        # (S,)
    split: np.ndarray         # (S,) of "train"/"test"

    def __len__(self):
        return len(self.records)

    @property
    def ids(self):
        return [r["id"] for r in self.records]

    def subset(self, which):
        mask = self.split == which
        idx = np.flatnonzero(mask)
        return Dataset(self.root, [self.records[i] for i in idx], self.clouds[idx], self.spectra[idx],
                       self.beta[idx], self.theta[idx], self.labels[idx], self.split[idx])


def _spectrum_for(mesh, points, cfg, rng_seed):
    n = cfg.n_lambda
    if cfg.noise == "pointcloud":
        spec = pointcloud_spectrum(points, n)
    else:
        spec = mesh_spectrum(mesh, n)
    if cfg.noise in ("multiplicative", "random-replacement"):
        spec = spectrum_noise(spec, cfg.noise, sigma=cfg.noise_sigma, seed=rng_seed)
    elif cfg.noise not in ("none", "pointcloud"):
        raise ValidationError(f"unknown noise mode {cfg.noise!r}")
    vals = np.asarray(spec.values, dtype=np.float64)
    if cfg.area_normalize:
        vals = vals * mesh.area()
    return vals


def build_dataset(cfg, out_dir, seed):
    """Generate meshes, clouds and spectra for a :class:`~specvae.config.DataConfig`; returns the manifest path."""
    out = Path(out_dir)
    (out / "meshes").mkdir(parents=True, exist_ok=True)
    (out / "clouds").mkdir(parents=True, exist_ok=True)
    if cfg.n_test > cfg.n_shapes:
        raise ValidationError("n_test exceeds n_shapes")
    n_classes = cfg.n_classes
    classes = beta_classes(n_classes)
    scale = dataset_scale(classes)
    rng = make_rng(seed, 0)
    labels = np.arange(cfg.n_shapes) % n_classes
    labels = labels[rng.permutation(cfg.n_shapes)]
    test = np.zeros(cfg.n_shapes, dtype=bool)
    test[rng.permutation(cfg.n_shapes)[:cfg.n_test]] = True
    bends = rng.uniform(-cfg.bend_max, cfg.bend_max, size=(cfg.n_shapes, N_SEGMENTS - 1))

    lines, csv_rows = [], []
    for i in range(cfg.n_shapes):
        sid = f"capsule_{i:05d}"
        lengths, radius = classes[labels[i]]
        try:
            p = CapsuleParams(lengths, radius, tuple(bends[i]), segments=cfg.segments, bend_max=max(cfg.bend_max, 1e-12))
            mesh, beta, theta = capsule_mesh(p)
            mesh = TriMesh(scale * (mesh.vertices - mesh.centroid()), mesh.triangles)
            points = sample_surface(mesh, cfg.n_points, make_rng(seed, 1, i))
            spectrum = _spectrum_for(mesh, points, cfg, make_rng(seed, 2, i))
        except (NumericalError, ValidationError) as exc:
            log.warning("dropping %s: %s", sid, exc)
            continue
        save_off(mesh, out / "meshes" / f"{sid}.off")
        write_cloud(out / "clouds" / f"{sid}.pcl", points)
        rec = {
            "id": sid,
            "mesh": f"meshes/{sid}.off",
            "cloud": f"clouds/{sid}.pcl",
            "spectrum": [float(v) for v in spectrum],
            "beta": [float(v) for v in beta],
            "theta": [[float(v) for v in row] for row in theta],
            "label": int(labels[i]),
            "split": "test" if test[i] else "train",
            "norm_scale": float(scale),
        }
        lines.append(json.dumps(rec, sort_keys=True))
        csv_rows.append(",".join([sid] + [repr(float(v)) for v in spectrum]))
    manifest = out / "manifest.jsonl"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    header = "shape_id," + ",".join(f"lambda_{k + 1}" for k in range(cfg.n_lambda))
    (out / "spectra.csv").write_text("\n".join([header] + csv_rows) + "\n", encoding="utf-8")
    (out / "config.json").write_text(json.dumps(_as_dict(cfg), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    log.info("wrote %d records to %s", len(lines), manifest)
    return manifest


def _as_dict(cfg):
    import dataclasses
    return dataclasses.asdict(cfg) if dataclasses.is_dataclass(cfg) else dict(cfg)


def read_manifest(path):
    with open(path, "r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def load_dataset(root):
    """Load a built dataset directory (or its manifest path)."""
    root = Path(root)
    manifest = root if root.suffix == ".jsonl" else root / "manifest.jsonl"
    root = manifest.parent
    if not manifest.exists():
        raise ValidationError(f"no manifest at {manifest}")
    records = read_manifest(manifest)
    if not records:
        raise ValidationError(f"{manifest} has no records")
    lens = {len(r["spectrum"]) for r in records}
    if len(lens) != 1:
        raise ValidationError(f"inconsistent spectrum lengths {sorted(lens)}")
    clouds = np.stack([read_cloud(root / r["cloud"]) for r in records])

    def field(name, shape_tail):
        if any(r.get(name) is None for r in records):
            return np.full((len(records),) + shape_tail, np.nan)
        return np.array([r[name] for r in records], dtype=np.float64)

    beta = field("beta", (0,))
    theta = field("theta", (0, 3))
    return Dataset(
        root=root,
        records=records,
        clouds=clouds,
        spectra=np.array([r["spectrum"] for r in records], dtype=np.float64),
        beta=beta,
        theta=theta,
        labels=np.array([r.get("label", -1) for r in records], dtype=np.int64),
        split=np.array([r["split"] for r in records]),
    )


def load_record_mesh(ds, rec):
    return load_mesh(ds.root / rec["mesh"])
