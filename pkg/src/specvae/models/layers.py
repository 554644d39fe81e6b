"""Small building blocks shared by the AE and VAE."""
from ..autodiff import ops
from .params import n_layers


def mlp(x, params, prefix, final_act=None):
    """Dense stack ``{prefix}.k``; ReLU between layers, ``final_act`` (or nothing) after the last."""
    n = n_layers(params, prefix)
    for k in range(n):
        x = ops.linear(x, params[f"{prefix}.{k}.w"], params[f"{prefix}.{k}.b"])
        if k < n - 1:
            x = ops.relu(x)
    if final_act is not None:
        x = final_act(x)
    return x


def quat_matrix(q):
    """Batched ``(B, 4) -> (B, 3, 3)`` rotation matrices, normalizing ``q`` first (tape-differentiable)."""
    norm = ops.sqrt(ops.sum(ops.square(q), axis=-1, keepdims=True) + 1e-24)
    q = q / norm
    w, x, y, z = (q[:, k:k + 1] for k in range(4))
    entries = [
        1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y),
    ]
    m = ops.concat(entries, axis=-1)
    return ops.reshape(m, (q.shape[0], 3, 3))
