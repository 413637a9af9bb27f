"""Compiled closed-loop RK4 loop.

Mirrors :func:`mannctl.controller.closed_loop_field` plus
:func:`mannctl.numerics.integrate_segmented` with explicit scalar loops, so a
50 s run at h = 1e-3 takes a fraction of a second. The state layout is the
one of :class:`mannctl.controller.LoopLayout`.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

CMD_STEP, CMD_SQUARE, CMD_SINE, CMD_CONSTANT = 0, 1, 2, 3
CMD_CODES = {"step": CMD_STEP, "square": CMD_SQUARE, "sine": CMD_SINE, "constant": CMD_CONSTANT}


@njit(cache=True)
def _command(t, kind, amp, period, phase):
    if kind == CMD_CONSTANT:
        return amp
    if kind == CMD_STEP:
        return amp if t >= phase else 0.0
    if kind == CMD_SINE:
        return amp * math.sin(2.0 * math.pi * (t - phase) / period)
    frac = ((t - phase) / period) % 1.0
    return amp if frac < 0.5 else -amp


@njit(cache=True)
def _field(t, y, out, epoch, dims, mats, gains, flags, sched, cmd):
    n, N, m, ns = dims[0], dims[1], dims[2], dims[3]
    A, B, Br, K, Aref, P = mats
    gw, gv, kappa, kz, Zm, cw, temp = gains[0], gains[1], gains[2], gains[3], gains[4], gains[5], gains[6]
    info_on, err_on, mem_on, nn_on, sq_alpha = flags[0], flags[1], flags[2], flags[3], flags[4]
    cf_const, cf_norm, sq_coef = sched

    o_xr = n
    o_W = 2 * n
    o_V = o_W + N * m
    o_bw = o_V + n * N
    o_bv = o_bw + m
    o_mu = o_bv + N

    e = np.empty(n)
    enorm2 = 0.0
    xnorm2 = 0.0
    for i in range(n):
        e[i] = y[i] - y[o_xr + i]
        enorm2 += e[i] * e[i]
        xnorm2 += y[i] * y[i]
    enorm = math.sqrt(enorm2)

    pre = np.empty(N)
    h = np.empty(N)
    for j in range(N):
        acc = y[o_bv + j]
        for i in range(n):
            acc += y[o_V + i * N + j] * y[i]
        pre[j] = acc
        h[j] = 1.0 / (1.0 + math.exp(-acc))

    z = np.empty(ns)
    lmax = -np.inf
    for k in range(ns):
        acc = 0.0
        for j in range(N):
            acc += y[o_mu + j * ns + k] * h[j]
        z[k] = acc / temp
        if z[k] > lmax:
            lmax = z[k]
    zsum = 0.0
    for k in range(ns):
        z[k] = math.exp(z[k] - lmax)
        zsum += z[k]
    for k in range(ns):
        z[k] = z[k] / zsum

    Mr = np.zeros(N)
    if mem_on:
        for j in range(N):
            acc = 0.0
            for k in range(ns):
                acc += y[o_mu + j * ns + k] * z[k]
            Mr[j] = acc

    wn2 = 0.0
    for j in range(N * m):
        wn2 += y[o_W + j] * y[o_W + j]
    vn2 = 0.0
    for j in range(n * N):
        vn2 += y[o_V + j] * y[o_V + j]
    v = -kz * (math.sqrt(wn2) + math.sqrt(vn2) + Zm) * enorm

    u = np.empty(m)
    qm = np.empty(m)
    for c in range(m):
        ubl = 0.0
        for i in range(n):
            ubl -= K[c, i] * y[i]
        uad = 0.0
        if nn_on:
            acc = 0.0
            for j in range(N):
                acc += y[o_W + j * m + c] * (h[j] + Mr[j])
            uad = -acc - y[o_bw + c]
        u[c] = ubl + uad + v
        acc = 0.0
        for i in range(n):
            ePi = 0.0
            for k in range(n):
                ePi += e[k] * P[k, i]
            acc += ePi * B[i, c]
        qm[c] = acc

    s = _command(t, cmd[0], cmd[1], cmd[2], cmd[3])
    cf = cf_const[epoch] + cf_norm[epoch] * math.sqrt(xnorm2)
    sq = y[1] * y[1] if sq_alpha else xnorm2
    f = (sq_coef[0] * cf + sq_coef[1]) * sq + sq_coef[2] * cf

    for i in range(n):
        acc = 0.0
        acc_r = 0.0
        for j in range(n):
            acc += A[i, j] * y[j]
            acc_r += Aref[i, j] * y[o_xr + j]
        for c in range(m):
            acc += B[i, c] * (u[c] + f)
        out[i] = acc + Br[i] * s
        out[o_xr + i] = acc_r + Br[i] * s

    if nn_on:
        leak_w = kappa * gw * enorm
        leak_v = kappa * gv * enorm
        for j in range(N):
            dh = h[j] * (1.0 - h[j])
            coef = gw * (h[j] - dh * pre[j])
            r = 0.0
            for c in range(m):
                wjc = y[o_W + j * m + c]
                out[o_W + j * m + c] = coef * qm[c] - leak_w * wjc
                r += qm[c] * wjc
            g = r * dh
            for i in range(n):
                out[o_V + i * N + j] = gv * y[i] * g - leak_v * y[o_V + i * N + j]
            out[o_bv + j] = gv * g - leak_v * y[o_bv + j]
        for c in range(m):
            out[o_bw + c] = gw * qm[c] - leak_w * y[o_bw + c]
    else:
        for j in range(o_W, o_mu):
            out[j] = 0.0

    if mem_on:
        for j in range(N):
            target = 0.0
            if info_on:
                target += cw * h[j]
            if err_on:
                for c in range(m):
                    target += y[o_W + j * m + c] * qm[c]
            for k in range(ns):
                out[o_mu + j * ns + k] = (target - y[o_mu + j * ns + k]) * z[k]
    else:
        for j in range(N * ns):
            out[o_mu + j] = 0.0


@njit(cache=True)
def run(y0, seg_a, seg_b, seg_b_left, seg_n, seg_epoch, dims, mats, gains, flags, sched, cmd):
    """Integrate all segments; returns ``(t, Y, fail_index)`` (``-1`` when finite throughout)."""
    total = 1
    for s in range(seg_a.size):
        total += seg_n[s]
    dim = y0.size
    ts = np.empty(total)
    Y = np.empty((total, dim))
    y = y0.copy()
    ts[0] = seg_a[0]
    Y[0] = y
    k1 = np.empty(dim)
    k2 = np.empty(dim)
    k3 = np.empty(dim)
    k4 = np.empty(dim)
    tmp = np.empty(dim)
    idx = 0
    for s in range(seg_a.size):
        a = seg_a[s]
        b = seg_b[s]
        nstep = seg_n[s]
        ep = seg_epoch[s]
        for i in range(nstep):
            t = a + (b - a) * i / nstep
            if i == nstep - 1:
                t_next = b
                t_end = seg_b_left[s]
            else:
                t_next = a + (b - a) * (i + 1) / nstep
                t_end = t_next
            dt = t_next - t
            t_half = t + 0.5 * dt
            _field(t, y, k1, ep, dims, mats, gains, flags, sched, cmd)
            for j in range(dim):
                tmp[j] = y[j] + 0.5 * dt * k1[j]
            _field(t_half, tmp, k2, ep, dims, mats, gains, flags, sched, cmd)
            for j in range(dim):
                tmp[j] = y[j] + 0.5 * dt * k2[j]
            _field(t_half, tmp, k3, ep, dims, mats, gains, flags, sched, cmd)
            for j in range(dim):
                tmp[j] = y[j] + dt * k3[j]
            _field(t_end, tmp, k4, ep, dims, mats, gains, flags, sched, cmd)
            finite = True
            for j in range(dim):
                y[j] = y[j] + (dt / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
                if not math.isfinite(y[j]):
                    finite = False
            idx += 1
            ts[idx] = t_next
            Y[idx] = y
            if not finite:
                return ts[: idx + 1], Y[: idx + 1], idx
    return ts, Y, -1
