"""Versioned configuration: every default lives here.

A config is a tree of dataclasses serialised as JSON. Any leaf can be
overridden with a dotted key, e.g. ``{"vae.epochs": 40}`` or, on the command
line, ``--vae.epochs 40``.
"""
import dataclasses
import json
from dataclasses import dataclass, field

from .errors import ValidationError

CONFIG_VERSION = 1


@dataclass
class ModelConfig:
    n_lambda: int = 20
    dim_x: int = 64
    n_out: int = 256
    z_r: int = 3
    z_e: int = 5
    z_i: int = 5
    enc_point: tuple = (32, 64, 128)
    enc_fc: tuple = (128,)
    dec_fc: tuple = (128, 256)
    vae_r_hidden: tuple = (64, 32)
    vae_x_hidden: tuple = (256, 128)
    head_hidden: int = 64
    rot_dec_hidden: tuple = (32, 64)
    x_dec_hidden: tuple = (128, 256)
    spec_hidden: tuple = (64, 64)
    sigma_eps: float = 1e-6

    @property
    def z_dim(self):
        return self.z_r + self.z_e + self.z_i

    def groups(self):
        """Slices of the concatenated latent ``(z_R, z_E, z_I)``."""
        r, e = self.z_r, self.z_r + self.z_e
        return {"R": slice(0, r), "E": slice(r, e), "I": slice(e, e + self.z_i)}


@dataclass
class DataConfig:
    n_shapes: int = 512
    n_test: int = 64
    n_points: int = 1024          # N_T, points cached per shape
    n_lambda: int = 20
    noise: str = "none"           # none | multiplicative | random-replacement | pointcloud
    noise_sigma: float = 0.1
    area_normalize: bool = False
    n_classes: int = 8            # distinct intrinsic (beta) identities
    bend_max: float = 1.2
    segments: int = 12            # vertices around the tube


@dataclass
class LossConfig:
    alpha_c: float = 0.75
    alpha_h: float = 0.5
    r_c: float = 10.0
    r_h: float = 1.0


@dataclass
class PenaltyConfig:
    # articulated-body weights (beta4, gamma_I, w_J) = (25, 5, 5) with eta = dim(X);
    # zeta is scaled for raw (unnormalized) capsule spectra
    beta1: float = 1.0
    beta2: float = 1.0
    beta3: float = 1.0
    beta4: float = 25.0
    gamma_i: float = 5.0
    w_j: float = 5.0
    zeta: float = 16.0
    eta: float = 64.0
    w_q: float = 10.0
    rot_consistency: float = 0.0


@dataclass
class AETrainConfig:
    epochs: int = 30
    batch_size: int = 32
    lr: float = 1e-3
    weight_decay: float = 5e-6
    n_input: int = 256            # N_S, points subsampled per step
    angle_min: float = 0.0
    angle_max: float = 6.283185307179586


@dataclass
class VAETrainConfig:
    epochs: int = 60
    batch_size: int = 64
    lr: float = 1e-3
    weight_decay: float = 5e-6
    clip: float = 100.0


@dataclass
class Config:
    version: int = CONFIG_VERSION
    seed: int = 0
    model: ModelConfig = field(default_factory=ModelConfig)
    data: DataConfig = field(default_factory=DataConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    penalty: PenaltyConfig = field(default_factory=PenaltyConfig)
    ae: AETrainConfig = field(default_factory=AETrainConfig)
    vae: VAETrainConfig = field(default_factory=VAETrainConfig)

    def to_dict(self):
        return _to_plain(dataclasses.asdict(self))

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d):
        return _build(cls, d, "")

    def override(self, items):
        """New config with dotted-key overrides applied; values are coerced to the field type."""
        d = self.to_dict()
        for key, value in dict(items).items():
            node, parts = d, key.split(".")
            for p in parts[:-1]:
                if not isinstance(node.get(p), dict):
                    raise ValidationError(f"unknown config key {key!r}")
                node = node[p]
            if parts[-1] not in node or isinstance(node[parts[-1]], dict):
                raise ValidationError(f"unknown config key {key!r}")
            node[parts[-1]] = _coerce(node[parts[-1]], value, key)
        return Config.from_dict(d)


def _to_plain(x):
    if isinstance(x, dict):
        return {k: _to_plain(v) for k, v in x.items()}
    if isinstance(x, (tuple, list)):
        return [_to_plain(v) for v in x]
    return x


def _coerce(current, value, key):
    if not isinstance(value, str):
        return value
    try:
        if isinstance(current, bool):
            if value.lower() in ("1", "true", "yes", "on"):
                return True
            if value.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if isinstance(current, int):
            return int(value)
        if isinstance(current, float):
            return float(value)
        if isinstance(current, list):
            return [int(v) for v in value.split(",") if v]
    except ValueError:
        raise ValidationError(f"bad value {value!r} for config key {key!r}") from None
    return value


def _build(cls, d, where):
    if not isinstance(d, dict):
        raise ValidationError(f"config section {where or 'root'} must be an object")
    known = {f.name: f for f in dataclasses.fields(cls)}
    extra = set(d) - set(known)
    if extra:
        raise ValidationError(f"unknown config key(s) in {where or 'root'}: {sorted(extra)}")
    kwargs = {}
    for name, f in known.items():
        if name not in d:
            continue
        v = d[name]
        sub = f.default_factory if f.default_factory is not dataclasses.MISSING else None
        if sub is not None and dataclasses.is_dataclass(sub):
            kwargs[name] = _build(sub, v, f"{where}{name}.")
        elif isinstance(v, list):
            kwargs[name] = tuple(v)
        else:
            kwargs[name] = v
    cfg = cls(**kwargs)
    _validate(cfg, where)
    return cfg


def _validate(cfg, where):
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            continue
        if f.name in ("seed", "version", "angle_min", "angle_max"):
            continue
        if v < 0:
            raise ValidationError(f"config {where}{f.name} must be >= 0, got {v}")


def load_config(path=None, overrides=None):
    cfg = Config()
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            try:
                cfg = Config.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    if overrides:
        cfg = cfg.override(overrides)
    return cfg
