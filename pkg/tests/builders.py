"""Random instance builders shared by module and acceptance tests."""

import numpy as np

from dspnet.geometry import BackProjectionResult
from dspnet.tensorcore import ParamSet, Tensor
from dspnet.tgmf import init_tgmf_params


def fusion_instance(rng, n_p=None, m=None, d_i=None, d_m=None, d_k=None, l_t=None):
    """Feature maps, back-projection result, text features and TGMF params."""
    n_p = n_p or int(rng.integers(1, 12))
    m = m or int(rng.integers(1, 6))
    d_i = d_i or int(rng.integers(1, 6))
    d_m = d_m or int(rng.integers(1, 6))
    d_k = d_k or int(rng.integers(1, 5))
    l_t = l_t or int(rng.integers(1, 6))
    maps = rng.normal(size=(m, 3, 3, d_i))
    valid = rng.random((n_p, m)) < 0.6
    valid[0] = False  # always include a point no view sees
    feats = np.where(valid[..., None], rng.normal(size=(n_p, m, d_i)), 0.0)
    z_t = rng.normal(size=(l_t, d_m))
    mask = rng.random(l_t) < 0.7
    mask[int(rng.integers(l_t))] = True
    params = ParamSet()
    init_tgmf_params(params, d_i, d_m, d_k, rng)
    return {
        "maps": Tensor(maps),
        "bp": BackProjectionResult(Tensor(feats), valid),
        "z_t": Tensor(z_t),
        "mask": mask,
        "params": params.scope("tgmf"),
    }


def permute_views(inst, perm):
    bp = inst["bp"]
    return dict(inst, maps=Tensor(inst["maps"].data[perm]),
                bp=BackProjectionResult(Tensor(bp.features.data[:, perm]), bp.valid[:, perm]))
