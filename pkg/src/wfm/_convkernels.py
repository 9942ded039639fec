"""Numba kernels for 3x3x3 convolutions over (N, C, D, H, W) arrays.

Inputs arrive pre-padded by 1 voxel per spatial side.  The stride-1 forward
kernel processes two output channels per pass so the width loop stays in
vector registers; stride-2 variants are plain loops (they only run at the
coarse grid sizes).  Kernels are single-threaded and bitwise deterministic
for a given build.
"""

import numpy as np
from numba import njit

_JIT = dict(cache=True, fastmath=True, nogil=True)


@njit(**_JIT)
def conv_s1(xp, w, bias, out):
    # xp (N, C, D+2, H+2, W+2), w (O, C, 3, 3, 3), out (N, O, D, H, W)
    N, O, D, H, W = out.shape
    C = xp.shape[1]
    a0 = np.empty(W, xp.dtype)
    a1 = np.empty(W, xp.dtype)
    for n in range(N):
        for o in range(0, O - 1, 2):
            for od in range(D):
                for oh in range(H):
                    for ow in range(W):
                        a0[ow] = bias[o]
                        a1[ow] = bias[o + 1]
                    for c in range(C):
                        for kd in range(3):
                            for kh in range(3):
                                xrow = xp[n, c, od + kd, oh + kh]
                                u0 = w[o, c, kd, kh, 0]
                                u1 = w[o, c, kd, kh, 1]
                                u2 = w[o, c, kd, kh, 2]
                                v0 = w[o + 1, c, kd, kh, 0]
                                v1 = w[o + 1, c, kd, kh, 1]
                                v2 = w[o + 1, c, kd, kh, 2]
                                for ow in range(W):
                                    x0 = xrow[ow]
                                    x1 = xrow[ow + 1]
                                    x2 = xrow[ow + 2]
                                    a0[ow] += u0 * x0 + u1 * x1 + u2 * x2
                                    a1[ow] += v0 * x0 + v1 * x1 + v2 * x2
                    for ow in range(W):
                        out[n, o, od, oh, ow] = a0[ow]
                        out[n, o + 1, od, oh, ow] = a1[ow]
        if O % 2:
            o = O - 1
            for od in range(D):
                for oh in range(H):
                    for ow in range(W):
                        a0[ow] = bias[o]
                    for c in range(C):
                        for kd in range(3):
                            for kh in range(3):
                                xrow = xp[n, c, od + kd, oh + kh]
                                u0 = w[o, c, kd, kh, 0]
                                u1 = w[o, c, kd, kh, 1]
                                u2 = w[o, c, kd, kh, 2]
                                for ow in range(W):
                                    a0[ow] += u0 * xrow[ow] + u1 * xrow[ow + 1] + u2 * xrow[ow + 2]
                    for ow in range(W):
                        out[n, o, od, oh, ow] = a0[ow]
    return out


@njit(**_JIT)
def conv_s2(xp, w, bias, out):
    # stride-2: out dims are half the unpadded input dims
    N, O, D, H, W = out.shape
    C = xp.shape[1]
    for n in range(N):
        for o in range(O):
            for od in range(D):
                for oh in range(H):
                    for ow in range(W):
                        acc = bias[o]
                        for c in range(C):
                            for kd in range(3):
                                for kh in range(3):
                                    for kw in range(3):
                                        acc += (w[o, c, kd, kh, kw]
                                                * xp[n, c, 2 * od + kd, 2 * oh + kh, 2 * ow + kw])
                        out[n, o, od, oh, ow] = acc
    return out


@njit(**_JIT)
def grad_w_s1(xp, g, gw):
    # gw (O, C, 3, 3, 3) accumulates grad wrt weights; g (N, O, D, H, W)
    N, O, D, H, W = g.shape
    C = xp.shape[1]
    zero = xp[0, 0, 0, 0, 0] * 0  # accumulator in the array dtype
    for n in range(N):
        for od in range(D):
            for oh in range(H):
                for c in range(C):
                    for kd in range(3):
                        for kh in range(3):
                            xrow = xp[n, c, od + kd, oh + kh]
                            for o in range(O):
                                grow = g[n, o, od, oh]
                                s0 = zero
                                s1 = zero
                                s2 = zero
                                for ow in range(W):
                                    gv = grow[ow]
                                    s0 += gv * xrow[ow]
                                    s1 += gv * xrow[ow + 1]
                                    s2 += gv * xrow[ow + 2]
                                gw[o, c, kd, kh, 0] += s0
                                gw[o, c, kd, kh, 1] += s1
                                gw[o, c, kd, kh, 2] += s2
    return gw


@njit(**_JIT)
def grad_w_s2(xp, g, gw):
    N, O, D, H, W = g.shape
    C = xp.shape[1]
    zero = xp[0, 0, 0, 0, 0] * 0
    for n in range(N):
        for od in range(D):
            for oh in range(H):
                for c in range(C):
                    for kd in range(3):
                        for kh in range(3):
                            xrow = xp[n, c, 2 * od + kd, 2 * oh + kh]
                            for o in range(O):
                                grow = g[n, o, od, oh]
                                s0 = zero
                                s1 = zero
                                s2 = zero
                                for ow in range(W):
                                    gv = grow[ow]
                                    s0 += gv * xrow[2 * ow]
                                    s1 += gv * xrow[2 * ow + 1]
                                    s2 += gv * xrow[2 * ow + 2]
                                gw[o, c, kd, kh, 0] += s0
                                gw[o, c, kd, kh, 1] += s1
                                gw[o, c, kd, kh, 2] += s2
    return gw
