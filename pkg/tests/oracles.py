"""Independent brute-force reference implementations used by the tests.

These stay deliberately naive (explicit Python loops, no vectorization) so
they cannot share a code path, or a bug, with the engine under test.
"""

import numpy as np


def conv2d_oracle(x, w, stride, kind):
    """Sliding-window convolution, accumulating per output element in
    (input-channel, kernel-row, kernel-col) order in the input dtype."""
    b_n, c_in, h, wd = x.shape
    if kind == "depthwise3x3":
        c_out, kh, kw, pad = c_in, 3, 3, 1
    elif kind == "standard3x3":
        c_out, kh, kw, pad = w.shape[0], 3, 3, 1
    elif kind == "pointwise1x1":
        c_out, kh, kw, pad = w.shape[0], 1, 1, 0
    else:
        raise ValueError(kind)
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    out = np.zeros((b_n, c_out, oh, ow), dtype=x.dtype)
    zero = x.dtype.type(0.0)
    for b in range(b_n):
        for co in range(c_out):
            for i in range(oh):
                for j in range(ow):
                    acc = zero
                    if kind == "depthwise3x3":
                        ci_range = [co]
                    else:
                        ci_range = range(c_in)
                    for ci in ci_range:
                        for u in range(kh):
                            for v in range(kw):
                                ih = i * stride - pad + u
                                iw = j * stride - pad + v
                                if 0 <= ih < h and 0 <= iw < wd:
                                    if kind == "depthwise3x3":
                                        wv = w[co, u, v]
                                    else:
                                        wv = w[co, ci, u, v]
                                    acc = acc + x[b, ci, ih, iw] * wv
                    out[b, co, i, j] = acc
    return out


def pairwise_euclidean_oracle(qf, gf):
    q_n, dim = qf.shape
    g_n = gf.shape[0]
    out = np.zeros((q_n, g_n), dtype=np.float64)
    for i in range(q_n):
        for j in range(g_n):
            s = 0.0
            for c in range(dim):
                d = float(qf[i, c]) - float(gf[j, c])
                s += d * d
            out[i, j] = s ** 0.5
    return out


def ranked_gallery_oracle(dist_row):
    """Gallery indices sorted by (distance, index): exhaustive, tie-stable."""
    return [j for _, j in sorted((float(d), j) for j, d in enumerate(dist_row))]


def cmc_oracle(dist, probe_labels, gallery_labels, ks):
    """Rank-k accuracy by exhaustively ranking each probe's gallery."""
    hits = {k: 0 for k in ks}
    n = len(probe_labels)
    for i in range(n):
        order = ranked_gallery_oracle(dist[i])
        rank = None
        for pos, j in enumerate(order):
            if gallery_labels[j] == probe_labels[i]:
                rank = pos
                break
        for k in ks:
            if rank is not None and rank < k:
                hits[k] += 1
    return [hits[k] / n for k in ks]


def average_precision_oracle(dist_row, probe_label, gallery_labels):
    order = ranked_gallery_oracle(dist_row)
    relevant = [1 if gallery_labels[j] == probe_label else 0 for j in order]
    total = sum(relevant)
    if total == 0:
        raise ValueError("probe identity absent from gallery")
    ap = 0.0
    seen = 0
    for pos, rel in enumerate(relevant):
        if rel:
            seen += 1
            ap += seen / (pos + 1)
    return ap / total


def mean_ap_oracle(dist, probe_labels, gallery_labels):
    aps = [average_precision_oracle(dist[i], probe_labels[i], gallery_labels)
           for i in range(len(probe_labels))]
    return sum(aps) / len(aps)
