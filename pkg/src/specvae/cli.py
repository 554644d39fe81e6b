"""Command-line interface.

Every command takes the global flags ``--config``, ``--seed`` and ``--out``
(an output directory), plus any number of dotted config overrides such as
``--vae.epochs 10``. Exit codes: 0 success, 2 invalid input, 3 numerical
failure. Tabular outputs are CSV with a header row.
"""
import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import Config, load_config
from .errors import NumericalError, ValidationError

log = logging.getLogger("specvae")


# ------------------------------------------------------------------- helpers

def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    log.info("wrote %s", path)


def _split_overrides(extra):
    out, i = {}, 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or len(tok) == 2:
            raise ValidationError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        elif i + 1 < len(extra):
            val = extra[i + 1]
            i += 2
        else:
            raise ValidationError(f"missing value for {tok}")
        out[key.replace("-", "_")] = val
    return out


def _config(args, base=None):
    """Config from ``--config`` (or ``base``, e.g. a checkpoint's), then overrides, then ``--seed``."""
    if args.config:
        cfg = load_config(args.config)
    elif base is not None:
        cfg = Config.from_dict(base)
    else:
        cfg = Config()
    if args.overrides:
        cfg = cfg.override(args.overrides)
    if args.seed is not None:
        cfg = cfg.override({"seed": args.seed})
    return cfg


def _out(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _models(args):
    from .train import load_params
    ae, _ = load_params(args.ae, "ae")
    vae, head = load_params(args.vae, "vae")
    return ae, vae, _config(args, head["config"])


def _dataset(args, split=None):
    from .data import load_dataset
    ds = load_dataset(args.data)
    return ds.subset(split) if split else ds


def _cloud_by_id(ds, sid):
    ids = ds.ids
    if sid not in ids:
        raise ValidationError(f"no shape with id {sid!r} in {ds.root}")
    return ds.clouds[ids.index(sid)]


# ------------------------------------------------------------------ commands

def cmd_spectra(args):
    from .data import heightfield_mesh, read_pgm
    from .data.dataset import _spectrum_for
    from .geom import load_mesh, sample_surface
    from .rng import make_rng

    cfg = _config(args)
    d = cfg.data
    if args.n_lambda:
        d.n_lambda = args.n_lambda
    if args.noise:
        d.noise = args.noise
    rows = []
    for i, path in enumerate(args.meshes):
        p = Path(path)
        mesh = heightfield_mesh(read_pgm(p)) if p.suffix.lower() == ".pgm" else load_mesh(p)
        if args.normalize:
            mesh = mesh.transformed(scale=1.0 / mesh.bbox_diagonal(), offset=-mesh.centroid() / mesh.bbox_diagonal())
        points = sample_surface(mesh, d.n_points, make_rng(cfg.seed, 1, i)) if d.noise == "pointcloud" else None
        spec = _spectrum_for(mesh, points, d, make_rng(cfg.seed, 2, i))
        rows.append([p.stem] + list(spec))
    _write_csv(_out(args) / "spectra.csv", ["shape_id"] + [f"lambda_{k + 1}" for k in range(d.n_lambda)], rows)


def cmd_build_data(args):
    from .data import build_dataset
    cfg = _config(args)
    build_dataset(cfg.data, _out(args), cfg.seed)


def cmd_train_ae(args):
    from .train import train_ae
    cfg = _config(args)
    out = _out(args)
    (out / "config.json").write_text(cfg.to_json() + "\n", encoding="utf-8")
    train_ae(_dataset(args), cfg, out)


def cmd_train_vae(args):
    from .train import load_params, train_vae
    ae, head = load_params(args.ae, "ae")
    cfg = _config(args, head["config"])
    out = _out(args)
    (out / "config.json").write_text(cfg.to_json() + "\n", encoding="utf-8")
    train_vae(_dataset(args), ae, cfg, out)


def cmd_sample(args):
    from .eval import sample_prior
    from .geom import save_ply
    ae, vae, cfg = _models(args)
    out = _out(args)
    clouds, spectra = sample_prior(ae, vae, args.n, cfg, cfg.seed)
    rows = []
    for k, (c, s) in enumerate(zip(clouds, spectra)):
        name = f"sample_{k:03d}.ply"
        save_ply(c, out / name)
        rows.append([k, name] + list(s))
    _write_csv(out / "samples.csv", ["index", "file"] + [f"lambda_hat_{k + 1}" for k in range(cfg.model.n_lambda)], rows)


def cmd_interpolate(args):
    from .eval import interpolate
    from .geom import save_ply
    ae, vae, cfg = _models(args)
    ds = _dataset(args)
    clouds = interpolate(ae, vae, _cloud_by_id(ds, args.a), _cloud_by_id(ds, args.b), cfg,
                         axis=args.axis, steps=args.steps, seed=cfg.seed)
    out = _out(args)
    t = np.linspace(0.0, 1.0, args.steps)
    if args.axis == "both":
        grid = [(te, ti) for te in t for ti in t]
    elif args.axis == "E":
        grid = [(s, 0.0) for s in t]
    else:
        grid = [(0.0, s) for s in t]
    rows = []
    for k, (c, (te, ti)) in enumerate(zip(clouds, grid)):
        name = f"interp_{k:03d}.ply"
        save_ply(c, out / name)
        rows.append([k, float(te), float(ti), name])
    _write_csv(out / "interpolation.csv", ["index", "t_E", "t_I", "file"], rows)


def cmd_transfer(args):
    from .eval import pose_transfer
    from .geom import save_ply
    ae, vae, cfg = _models(args)
    ds = _dataset(args)
    ab, ba = pose_transfer(ae, vae, _cloud_by_id(ds, args.a), _cloud_by_id(ds, args.b), cfg, cfg.seed)
    out = _out(args)
    save_ply(ab, out / "transfer_a_b.ply")
    save_ply(ba, out / "transfer_b_a.ply")
    _write_csv(out / "transfer.csv", ["file", "keeps", "pose_from"],
               [["transfer_a_b.ply", args.a, args.b], ["transfer_b_a.ply", args.b, args.a]])


def cmd_retrieve(args):
    from .eval import SPACES, encode, random_retrieval, retrieval_eval
    ae, vae, cfg = _models(args)
    ds = _dataset(args, args.split)
    if args.resamples < 1:
        raise ValidationError("--resamples must be >= 1")
    # one report per point resampling of the cached clouds
    reps = []
    for r in range(args.resamples):
        codes = encode(ae, vae, ds.clouds, cfg, cfg.seed + r)
        reps.append(retrieval_eval({s: codes.space(s) for s in SPACES + ("z_R",)}, ds.beta, ds.theta, k=args.k))

    def mean_sem(vals):
        v = np.asarray(vals, dtype=np.float64)
        sem = v.std(axis=0, ddof=1) / np.sqrt(len(v)) if len(v) > 1 else np.zeros(v.shape[1:])
        return v.mean(axis=0), sem

    rows = []
    for s in reps[0].rows:
        m, e = mean_sem([rep.rows[s] for rep in reps])
        rows.append([s, float(m[0]), float(m[1]), float(e[0]), float(e[1])])
    if args.baseline_seeds:
        m, e = mean_sem([random_retrieval(ds.beta, ds.theta, args.k, s) for s in range(args.baseline_seeds)])
        rows.append(["random", float(m[0]), float(m[1]), float(e[0]), float(e[1])])
    rows.append(["pair_mean_raw", reps[0].norm_beta, reps[0].norm_theta, 0.0, 0.0])
    _write_csv(_out(args) / "retrieval.csv", ["space", "E_beta", "E_theta", "E_beta_sem", "E_theta_sem"], rows)


def cmd_probe(args):
    from .eval import SPACES, encode, linear_probe
    ae, vae, cfg = _models(args)
    ds = _dataset(args)
    tr, te = ds.subset("train"), ds.subset("test")
    c_tr = encode(ae, vae, tr.clouds, cfg, cfg.seed)
    c_te = encode(ae, vae, te.clouds, cfg, cfg.seed)
    out = _out(args)
    spaces = {s: (c_tr.space(s), c_te.space(s)) for s in ("z_R",) + SPACES}
    spaces["spectrum"] = (tr.spectra, te.spectra)
    rows = []
    for name, (a, b) in spaces.items():
        res = linear_probe(a, tr.labels, b, te.labels, C=args.C)
        rows.append([name, res.accuracy, res.train_accuracy])
        _write_csv(out / f"probe_confusion_{name}.csv", ["true\\pred"] + [str(c) for c in res.classes],
                   [[str(c)] + [int(v) for v in row] for c, row in zip(res.classes, res.confusion)])
    _write_csv(out / "probe.csv", ["space", "accuracy", "train_accuracy"], rows)


def cmd_gradcheck(args):
    from .gradsuite import TOL, case_names, run_case
    cfg = _config(args)
    names = args.cases.split(",") if args.cases else case_names()
    unknown = set(names) - set(case_names())
    if unknown:
        raise ValidationError(f"unknown gradcheck case(s) {sorted(unknown)}")
    rows, bad = [], []
    for n in names:
        r = run_case(n, args.n_configs, cfg.seed)
        rows.append([n, r.configs, r.rejected, float(r.max_rel_err), "ok" if r.ok else "FAIL"])
        if not r.ok:
            bad.append(n)
    _write_csv(_out(args) / "gradcheck.csv", ["case", "configs", "rejected", "max_rel_err", "status"], rows)
    if bad:
        raise NumericalError(f"gradient check above {TOL:g} for: {', '.join(bad)}")


# -------------------------------------------------------------------- parser

def build_parser():
    glob = argparse.ArgumentParser(add_help=False)
    glob.add_argument("--config", default=argparse.SUPPRESS, help="JSON config file")
    glob.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="overrides the config seed")
    glob.add_argument("--out", default=argparse.SUPPRESS, help="output directory")

    p = argparse.ArgumentParser(prog="specvae", description=__doc__.splitlines()[0],
                                epilog="Config fields can be overridden with --section.field VALUE.")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=".")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help):
        sp = sub.add_parser(name, parents=[glob], help=help)
        sp.set_defaults(func=fn)
        return sp

    def models(sp):
        sp.add_argument("--ae", required=True, help="AE checkpoint")
        sp.add_argument("--vae", required=True, help="VAE checkpoint")

    sp = add("spectra", cmd_spectra, "LBO spectra of mesh (.off/.obj) or raster (.pgm) files")
    sp.add_argument("meshes", nargs="+")
    sp.add_argument("--n-lambda", type=int, default=None)
    sp.add_argument("--noise", choices=["none", "multiplicative", "random-replacement", "pointcloud"], default=None)
    sp.add_argument("--normalize", action="store_true", help="center and scale to unit bounding-box diagonal")

    add("build-data", cmd_build_data, "generate the capsule dataset")

    sp = add("train-ae", cmd_train_ae, "train the point-cloud AE")
    sp.add_argument("--data", required=True)

    sp = add("train-vae", cmd_train_vae, "train the latent VAE on frozen AE codes")
    sp.add_argument("--data", required=True)
    sp.add_argument("--ae", required=True)

    sp = add("sample", cmd_sample, "decode prior samples (z_R = 0)")
    models(sp)
    sp.add_argument("--n", type=int, default=8)

    sp = add("interpolate", cmd_interpolate, "interpolate z_E and/or z_I between two shapes")
    models(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--a", required=True)
    sp.add_argument("--b", required=True)
    sp.add_argument("--axis", choices=["E", "I", "both"], default="both")
    sp.add_argument("--steps", type=int, default=5)

    sp = add("transfer", cmd_transfer, "swap z_E between two shapes")
    models(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--a", required=True)
    sp.add_argument("--b", required=True)

    sp = add("retrieve", cmd_retrieve, "pose-aware retrieval errors per latent space")
    models(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--split", default="test")
    sp.add_argument("--k", type=int, default=3)
    sp.add_argument("--baseline-seeds", type=int, default=20)
    sp.add_argument("--resamples", type=int, default=3, help="point resamplings averaged (SEM reported)")

    sp = add("probe", cmd_probe, "linear probe accuracy per latent space")
    models(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--C", type=float, default=1.0)

    sp = add("gradcheck", cmd_gradcheck, "finite-difference gradient suite")
    sp.add_argument("--n-configs", type=int, default=20)
    sp.add_argument("--cases", default=None, help="comma-separated subset")
    return p


def main(argv=None):
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        args.overrides = _split_overrides(extra)
        args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
