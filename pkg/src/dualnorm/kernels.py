"""JIT-compiled numeric kernels.

Every kernel accumulates each output element in a fixed program order
(input channel outermost, then kernel row, then kernel column), never with
fastmath, so results are bit-reproducible across runs and across thread
counts: parallel loops only split independent output elements, never a
floating-point reduction. Buffers are allocated by the callers in ops.py;
kernels write in place.
"""

import numpy as np
from numba import njit, prange

_JIT = dict(cache=True, fastmath=False)


@njit(**_JIT, parallel=True)
def conv_std_fwd(xp, w, stride, out):
    """Standard convolution on a pre-padded input xp (B,Ci,Hp,Wp)."""
    B, Ci = xp.shape[0], xp.shape[1]
    Co, KH, KW = w.shape[0], w.shape[2], w.shape[3]
    OH, OW = out.shape[2], out.shape[3]
    for b in prange(B):
        for co in range(Co):
            o = out[b, co]
            for oh in range(OH):
                for ow in range(OW):
                    o[oh, ow] = 0.0
            for ci in range(Ci):
                xc = xp[b, ci]
                for kh in range(KH):
                    for kw in range(KW):
                        wv = w[co, ci, kh, kw]
                        for oh in range(OH):
                            xr = xc[oh * stride + kh]
                            orow = o[oh]
                            for ow in range(OW):
                                orow[ow] += xr[ow * stride + kw] * wv
    return out


@njit(**_JIT, parallel=True)
def conv_std_bwd_input(gy, w, stride, gxp):
    """Gradient wrt the padded input; gxp must be zeroed by the caller."""
    B, Co = gy.shape[0], gy.shape[1]
    Ci, KH, KW = w.shape[1], w.shape[2], w.shape[3]
    OH, OW = gy.shape[2], gy.shape[3]
    for b in prange(B):
        for ci in range(Ci):
            gxc = gxp[b, ci]
            for co in range(Co):
                g = gy[b, co]
                for kh in range(KH):
                    for kw in range(KW):
                        wv = w[co, ci, kh, kw]
                        for oh in range(OH):
                            gxr = gxc[oh * stride + kh]
                            grow = g[oh]
                            for ow in range(OW):
                                gxr[ow * stride + kw] += grow[ow] * wv
    return gxp


@njit(**_JIT, parallel=True)
def conv_std_bwd_weight(gy, xp, stride, gw):
    """Weight gradient, accumulated into gw (caller zeroes or accumulates)."""
    B = gy.shape[0]
    Co, Ci, KH, KW = gw.shape
    OH, OW = gy.shape[2], gy.shape[3]
    for co in prange(Co):
        for ci in range(Ci):
            for kh in range(KH):
                for kw in range(KW):
                    acc0 = gw.dtype.type(0.0)
                    acc1 = gw.dtype.type(0.0)
                    acc2 = gw.dtype.type(0.0)
                    acc3 = gw.dtype.type(0.0)
                    for b in range(B):
                        g = gy[b, co]
                        xc = xp[b, ci]
                        for oh in range(OH):
                            grow = g[oh]
                            xr = xc[oh * stride + kh]
                            n4 = (OW // 4) * 4
                            for ow in range(0, n4, 4):
                                acc0 += grow[ow] * xr[ow * stride + kw]
                                acc1 += grow[ow + 1] * xr[(ow + 1) * stride + kw]
                                acc2 += grow[ow + 2] * xr[(ow + 2) * stride + kw]
                                acc3 += grow[ow + 3] * xr[(ow + 3) * stride + kw]
                            for ow in range(n4, OW):
                                acc0 += grow[ow] * xr[ow * stride + kw]
                    gw[co, ci, kh, kw] += ((acc0 + acc1) + (acc2 + acc3))
    return gw


@njit(**_JIT, parallel=True)
def pw_fwd(x2, w, out2):
    """Pointwise (1x1) convolution: x2 (B,Ci,P), w (Co,Ci), out2 (B,Co,P)."""
    B, Ci, P = x2.shape
    Co = w.shape[0]
    for b in prange(B):
        for co in range(Co):
            o = out2[b, co]
            for p in range(P):
                o[p] = 0.0
            for ci in range(Ci):
                wv = w[co, ci]
                xc = x2[b, ci]
                for p in range(P):
                    o[p] += xc[p] * wv
    return out2


@njit(**_JIT, parallel=True)
def pw_bwd_weight(gy2, x2, gw):
    """gw (Co,Ci) += sum over batch and positions of gy2 (B,Co,P) * x2 (B,Ci,P)."""
    B, Co, P = gy2.shape
    Ci = x2.shape[1]
    for co in prange(Co):
        for ci in range(Ci):
            acc0 = gw.dtype.type(0.0)
            acc1 = gw.dtype.type(0.0)
            acc2 = gw.dtype.type(0.0)
            acc3 = gw.dtype.type(0.0)
            for b in range(B):
                g = gy2[b, co]
                xc = x2[b, ci]
                n4 = (P // 4) * 4
                for p in range(0, n4, 4):
                    acc0 += g[p] * xc[p]
                    acc1 += g[p + 1] * xc[p + 1]
                    acc2 += g[p + 2] * xc[p + 2]
                    acc3 += g[p + 3] * xc[p + 3]
                for p in range(n4, P):
                    acc0 += g[p] * xc[p]
            gw[co, ci] += ((acc0 + acc1) + (acc2 + acc3))
    return gw


@njit(**_JIT, parallel=True)
def dw_fwd(xp, w, stride, out):
    """Depthwise convolution, one 2-D kernel per channel; w is (C,KH,KW)."""
    B, C = xp.shape[0], xp.shape[1]
    KH, KW = w.shape[1], w.shape[2]
    OH, OW = out.shape[2], out.shape[3]
    for b in prange(B):
        for c in range(C):
            o = out[b, c]
            xc = xp[b, c]
            for oh in range(OH):
                for ow in range(OW):
                    o[oh, ow] = 0.0
            for kh in range(KH):
                for kw in range(KW):
                    wv = w[c, kh, kw]
                    for oh in range(OH):
                        xr = xc[oh * stride + kh]
                        orow = o[oh]
                        for ow in range(OW):
                            orow[ow] += xr[ow * stride + kw] * wv
    return out


@njit(**_JIT, parallel=True)
def dw_bwd_input(gy, w, stride, gxp):
    B, C = gy.shape[0], gy.shape[1]
    KH, KW = w.shape[1], w.shape[2]
    OH, OW = gy.shape[2], gy.shape[3]
    for b in prange(B):
        for c in range(C):
            gxc = gxp[b, c]
            g = gy[b, c]
            for kh in range(KH):
                for kw in range(KW):
                    wv = w[c, kh, kw]
                    for oh in range(OH):
                        gxr = gxc[oh * stride + kh]
                        grow = g[oh]
                        for ow in range(OW):
                            gxr[ow * stride + kw] += grow[ow] * wv
    return gxp


@njit(**_JIT, parallel=True)
def dw_bwd_weight(gy, xp, stride, gw):
    B, C = gy.shape[0], gy.shape[1]
    KH, KW = gw.shape[1], gw.shape[2]
    OH, OW = gy.shape[2], gy.shape[3]
    for c in prange(C):
        for kh in range(KH):
            for kw in range(KW):
                acc0 = gw.dtype.type(0.0)
                acc1 = gw.dtype.type(0.0)
                acc2 = gw.dtype.type(0.0)
                acc3 = gw.dtype.type(0.0)
                for b in range(B):
                    g = gy[b, c]
                    xc = xp[b, c]
                    for oh in range(OH):
                        grow = g[oh]
                        xr = xc[oh * stride + kh]
                        n4 = (OW // 4) * 4
                        for ow in range(0, n4, 4):
                            acc0 += grow[ow] * xr[ow * stride + kw]
                            acc1 += grow[ow + 1] * xr[(ow + 1) * stride + kw]
                            acc2 += grow[ow + 2] * xr[(ow + 2) * stride + kw]
                            acc3 += grow[ow + 3] * xr[(ow + 3) * stride + kw]
                        for ow in range(n4, OW):
                            acc0 += grow[ow] * xr[ow * stride + kw]
                gw[c, kh, kw] += ((acc0 + acc1) + (acc2 + acc3))
    return gw


@njit(**_JIT, parallel=True)
def matmul_nt(a, bt, out):
    """out (M,N) = a (M,K) @ bt (N,K) transposed; fixed 4-lane reduction."""
    M, K = a.shape
    N = bt.shape[0]
    for m in prange(M):
        ar = a[m]
        for n in range(N):
            br = bt[n]
            acc0 = out.dtype.type(0.0)
            acc1 = out.dtype.type(0.0)
            acc2 = out.dtype.type(0.0)
            acc3 = out.dtype.type(0.0)
            k4 = (K // 4) * 4
            for k in range(0, k4, 4):
                acc0 += ar[k] * br[k]
                acc1 += ar[k + 1] * br[k + 1]
                acc2 += ar[k + 2] * br[k + 2]
                acc3 += ar[k + 3] * br[k + 3]
            for k in range(k4, K):
                acc0 += ar[k] * br[k]
            out[m, n] = ((acc0 + acc1) + (acc2 + acc3))
    return out


def warmup(dtype=np.float32):
    """Trigger JIT compilation of every kernel for the given dtype."""
    x = np.ones((2, 2, 6, 6), dtype=dtype)
    w = np.ones((3, 2, 3, 3), dtype=dtype)
    o = np.empty((2, 3, 4, 4), dtype=dtype)
    conv_std_fwd(x, w, 1, o)
    conv_std_bwd_input(o, w, 1, np.zeros_like(x))
    conv_std_bwd_weight(o, x, 1, np.zeros_like(w))
    x2 = np.ones((2, 2, 9), dtype=dtype)
    w2 = np.ones((3, 2), dtype=dtype)
    o2 = np.empty((2, 3, 9), dtype=dtype)
    pw_fwd(x2, w2, o2)
    pw_bwd_weight(o2, x2, np.zeros_like(w2))
    dw = np.ones((2, 3, 3), dtype=dtype)
    od = np.empty((2, 2, 4, 4), dtype=dtype)
    dw_fwd(x, dw, 1, od)
    dw_bwd_input(od, dw, 1, np.zeros_like(x))
    dw_bwd_weight(od, x, 1, np.zeros_like(dw))
    matmul_nt(np.ones((2, 5), dtype=dtype), np.ones((3, 5), dtype=dtype),
              np.empty((2, 3), dtype=dtype))
