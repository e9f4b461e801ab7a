"""Independent reference implementations used by the tests.

Everything here is written from the definitions with plain loops or direct
formulas and shares no code with the package beyond its data classes.
"""

import math

import numpy as np


def gelu(x):
    return 0.5 * x * (1 + np.tanh(math.sqrt(2 / math.pi) * (x + 0.044715 * x**3)))


def layer_norm(x, gain, bias, eps=1e-5):
    out = np.empty_like(x)
    for i, row in enumerate(x):
        mu = sum(row) / len(row)
        var = sum((r - mu) ** 2 for r in row) / len(row)
        out[i] = [(r - mu) / math.sqrt(var + eps) for r in row]
    return out * gain + bias


def affine(x, w, name, bias=True):
    out = x @ w[f"{name}.weight"]
    return out + w[f"{name}.bias"] if bias and f"{name}.bias" in w else out


def mlp2(x, w, name):
    return affine(gelu(affine(x, w, f"{name}.0")), w, f"{name}.1")


def softmax_list(scores):
    """Exp-normalize over the entries that are not None."""
    live = [s for s in scores if s is not None]
    top = max(live)
    e = [0.0 if s is None else math.exp(s - top) for s in scores]
    total = sum(e)
    return [v / total for v in e]


def attention(q, k, v, heads, w, prefix, key_mask=None):
    """Per-query, per-head loops; ``w`` maps parameter names to arrays."""
    pre = f"{prefix}." if prefix else ""
    qp = affine(q, w, f"{pre}q")
    kp = affine(k, w, f"{pre}k")
    vp = affine(v, w, f"{pre}v")
    lq, d = q.shape
    dh = d // heads
    ctx = np.zeros((lq, d))
    for h in range(heads):
        lo, hi = h * dh, (h + 1) * dh
        for i in range(lq):
            scores = []
            for j in range(len(k)):
                if key_mask is not None and not key_mask[j]:
                    scores.append(None)
                else:
                    scores.append(sum(qp[i, c] * kp[j, c] for c in range(lo, hi)) / math.sqrt(dh))
            for j, a in enumerate(softmax_list(scores)):
                ctx[i, lo:hi] += a * vp[j, lo:hi]
    return affine(ctx, w, f"{pre}o")


def fps(points, k, start=0):
    """Greedy max-min selection recomputing every distance from scratch."""
    chosen = [start]
    while len(chosen) < k:
        best, best_d = None, -1.0
        for i in range(len(points)):
            if i in chosen:
                continue
            d = min(float(np.sum((points[i] - points[j]) ** 2)) for j in chosen)
            if d > best_d:
                best, best_d = i, d
        chosen.append(best)
    return chosen


def camera_center(view):
    rot, trans = view.extrinsics[:3, :3], view.extrinsics[:3, 3]
    return -rot.T @ trans


def first_hit(eye, points, objects):
    """Ray parameter of the first box surface along ``eye -> point`` (1 = the point)."""
    d = points - eye
    best = np.full(len(points), np.inf)
    for o in objects:
        lo, hi = o.center - o.size / 2, o.center + o.size / 2
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo - eye) / d
            t2 = (hi - eye) / d
        tmin = np.nanmax(np.minimum(t1, t2), axis=1)
        tmax = np.nanmin(np.maximum(t1, t2), axis=1)
        hit = (tmax >= tmin) & (tmax > 0)
        best = np.where(hit, np.minimum(best, np.maximum(tmin, 0)), best)
    return best


def in_frustum(points, view):
    """Pinhole projection written out per point with round-half-up."""
    out = np.zeros(len(points), dtype=bool)
    for i, p in enumerate(points):
        cam = view.extrinsics[:3, :3] @ p + view.extrinsics[:3, 3]
        if cam[2] <= 1e-6:
            continue
        u = math.floor(view.fx * cam[0] / cam[2] + view.cx + 0.5)
        v = math.floor(view.fy * cam[1] / cam[2] + view.cy + 0.5)
        out[i] = 0 <= u < view.width and 0 <= v < view.height
    return out


def resolve(spec, words):
    """Answer string of a templated question, from the object list alone."""
    objs = spec.objects
    if words[:3] == ("what", "color", "is"):
        matches = [o for o in objs if o.class_name == words[4]]
        assert len(matches) == 1
        return matches[0].color_name
    if words[:2] == ("how", "many"):
        return str(sum(o.class_name == words[2] for o in objs))
    if words[:2] == ("is", "there"):
        color, name = words[3], words[4]
        return "yes" if any(o.class_name == name and o.color_name == color for o in objs) else "no"
    if words[:4] == ("which", "object", "is", "closest"):
        (target,) = [o for o in objs if o.class_name == words[6]]
        others = [o for o in objs if o is not target]
        dists = [math.dist(o.center, target.center) for o in others]
        return others[int(np.argmin(dists))].class_name
    raise ValueError(f"unknown question {words}")


def reasoning_layer(e_v, e_c, e_t, mask, w, heads):
    """Cross-attention to the dense rows, then one pre-norm joint block over [candidates, text]."""
    k = len(e_c)
    q = layer_norm(e_c, w["cross_norm.gain"], w["cross_norm.bias"])
    h = e_c + attention(q, e_v, e_v, heads, w, "cross")
    seq = np.vstack([h, e_t])
    key_mask = [True] * k + [bool(m) for m in mask]
    x = layer_norm(seq, w["self_norm.gain"], w["self_norm.bias"])
    seq = seq + attention(x, x, x, heads, w, "self", key_mask)
    seq = seq + mlp2(layer_norm(seq, w["ffn.norm.gain"], w["ffn.norm.bias"]), w, "ffn.mlp")
    return seq[:k], seq[k:]
