"""Compiled batch Dubins solver (same formulas and word order as the scalar solver)."""

from __future__ import annotations

import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi
_SNAP = 1e-9  # arcs within this of a full turn are zero
_INF = np.inf


@njit(cache=True)
def _mod2pi(x):
    x = x % TWO_PI
    if x > TWO_PI - _SNAP:
        return 0.0
    return x


@njit(cache=True)
def _wrap(a):
    a = np.fmod(a, TWO_PI)
    if a < 0.0:
        a += TWO_PI
    if a >= TWO_PI:
        a = 0.0
    return a


@njit(cache=True)
def _words(alpha, beta, d, out):
    """Fill ``out`` (6, 3) with normalized (t, p, q) per word; +inf rows are infeasible."""
    for i in range(6):
        for j in range(3):
            out[i, j] = _INF
    sa = math.sin(alpha)
    sb = math.sin(beta)
    ca = math.cos(alpha)
    cb = math.cos(beta)
    cab = math.cos(alpha - beta)

    p_sq = (d + sa - sb) ** 2 + (cb - ca) ** 2  # same as 2 + d^2 - 2cos(a-b) + 2d(sa-sb), no cancellation
    if p_sq >= -1e-12:
        tmp = math.atan2(cb - ca, d + sa - sb)
        out[0, 0] = _mod2pi(tmp - alpha)
        out[0, 1] = math.sqrt(max(p_sq, 0.0))
        out[0, 2] = _mod2pi(beta - tmp)

    p_sq = (d - sa + sb) ** 2 + (ca - cb) ** 2
    if p_sq >= -1e-12:
        tmp = math.atan2(ca - cb, d - sa + sb)
        out[1, 0] = _mod2pi(alpha - tmp)
        out[1, 1] = math.sqrt(max(p_sq, 0.0))
        out[1, 2] = _mod2pi(tmp - beta)

    p_sq = -2 + d * d + 2 * cab + 2 * d * (sa + sb)
    if p_sq >= -1e-12:
        p = math.sqrt(max(p_sq, 0.0))
        tmp = math.atan2(-ca - cb, d + sa + sb) - math.atan2(-2.0, p)
        out[2, 0] = _mod2pi(tmp - alpha)
        out[2, 1] = p
        out[2, 2] = _mod2pi(tmp - beta)

    p_sq = -2 + d * d + 2 * cab - 2 * d * (sa + sb)
    if p_sq >= -1e-12:
        p = math.sqrt(max(p_sq, 0.0))
        tmp = math.atan2(ca + cb, d - sa - sb) - math.atan2(2.0, p)
        out[3, 0] = _mod2pi(alpha - tmp)
        out[3, 1] = p
        out[3, 2] = _mod2pi(beta - tmp)

    tmp = (6.0 - d * d + 2 * cab + 2 * d * (sa - sb)) / 8.0
    if abs(tmp) <= 1.0 + 1e-12:
        phi = math.atan2(ca - cb, d - sa + sb)
        p = TWO_PI - math.acos(min(1.0, max(-1.0, tmp)))  # middle arc of a CCC word lies in [pi, 2pi]
        t = _mod2pi(alpha - phi + p / 2.0)
        out[4, 0] = t
        out[4, 1] = p
        out[4, 2] = _mod2pi(alpha - beta - t + p)

    tmp = (6.0 - d * d + 2 * cab + 2 * d * (sb - sa)) / 8.0
    if abs(tmp) <= 1.0 + 1e-12:
        phi = math.atan2(ca - cb, d + sa - sb)
        p = TWO_PI - math.acos(min(1.0, max(-1.0, tmp)))  # middle arc of a CCC word lies in [pi, 2pi]
        t = _mod2pi(-alpha - phi + p / 2.0)
        out[5, 0] = t
        out[5, 1] = p
        out[5, 2] = _mod2pi(beta - alpha - t + p)


@njit(cache=True)
def shortest_batch(q0, q1, rho, lengths, words, segs, ties):
    """Shortest word per pose pair; rows of ``q0``/``q1`` are paired (both (n, 3))."""
    buf = np.empty((6, 3))
    for i in range(q0.shape[0]):
        dn = q1[i, 0] - q0[i, 0]
        de = q1[i, 1] - q0[i, 1]
        D = math.hypot(dn, de)
        theta = math.atan2(de, dn) if D > 0 else 0.0
        alpha = _wrap(q0[i, 2] - theta)
        beta = _wrap(q1[i, 2] - theta)
        _words(alpha, beta, D / rho, buf)
        best = _INF
        second = _INF
        bw = -1
        for w in range(6):
            if buf[w, 0] == _INF:
                continue
            ln = buf[w, 0] + buf[w, 1] + buf[w, 2]
            if ln < best:
                second = best
                best = ln
                bw = w
            elif ln < second:
                second = ln
        lengths[i] = best * rho
        words[i] = bw
        for j in range(3):
            segs[i, j] = buf[bw, j] * rho
        ties[i] = (second - best) * rho <= 1e-9


@njit(cache=True)
def lengths_batch(q0, q1, rho, lengths):
    """Shortest-path length per pose pair."""
    buf = np.empty((6, 3))
    for i in range(q0.shape[0]):
        dn = q1[i, 0] - q0[i, 0]
        de = q1[i, 1] - q0[i, 1]
        D = math.hypot(dn, de)
        theta = math.atan2(de, dn) if D > 0 else 0.0
        alpha = _wrap(q0[i, 2] - theta)
        beta = _wrap(q1[i, 2] - theta)
        _words(alpha, beta, D / rho, buf)
        best = _INF
        for w in range(6):
            if buf[w, 0] == _INF:
                continue
            ln = buf[w, 0] + buf[w, 1] + buf[w, 2]
            if ln < best:
                best = ln
        lengths[i] = best * rho
