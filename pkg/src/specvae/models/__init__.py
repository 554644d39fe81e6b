from .ae import ae_decode, ae_encode, init_ae, shape_decode
from .layers import mlp, quat_matrix
from .params import count, init_mlp, load_checkpoint, save_checkpoint
from .vae import (
    BUFFERS,
    Posterior,
    decode_r,
    decode_x,
    encode_r,
    encode_x,
    init_vae,
    joint_posterior,
    predict_spectrum,
    reparameterize,
    vae_decode,
    vae_encode,
    vae_recon_loss,
)

__all__ = [
    "BUFFERS", "Posterior", "ae_decode", "ae_encode", "count", "decode_r", "decode_x", "encode_r", "encode_x",
    "init_ae", "init_mlp", "init_vae", "joint_posterior", "load_checkpoint", "mlp", "predict_spectrum",
    "quat_matrix", "reparameterize", "save_checkpoint", "shape_decode", "vae_decode", "vae_encode",
    "vae_recon_loss",
]
