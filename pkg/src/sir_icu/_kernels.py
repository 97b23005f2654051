"""Compiled inner loops for the rk4 paths.

The arithmetic is written in the same order as the pure-Python steppers in
:mod:`sir_icu.dynamics`, and the compiled code does not contract or reorder
floating-point operations, so both produce the same bits. Set
``SIR_ICU_NO_JIT=1`` to run everything interpreted.
"""
from __future__ import annotations

import os

import numpy as np

JIT = False
if not os.environ.get("SIR_ICU_NO_JIT"):
    try:
        import numba

        JIT = True
    except ImportError:  # pragma: no cover - optional speed-up
        pass


def _jit(fn):
    return numba.njit(cache=True)(fn) if JIT else fn


@_jit
def _rhs(s, i, v, beta, gamma):
    bsi = beta * s * i
    return -bsi - v * s, bsi - gamma * i


@_jit
def rk4(s, i, v, h, beta, gamma):
    k1s, k1i = _rhs(s, i, v, beta, gamma)
    k2s, k2i = _rhs(s + 0.5 * h * k1s, i + 0.5 * h * k1i, v, beta, gamma)
    k3s, k3i = _rhs(s + 0.5 * h * k2s, i + 0.5 * h * k2i, v, beta, gamma)
    k4s, k4i = _rhs(s + h * k3s, i + h * k3i, v, beta, gamma)
    return (
        s + h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s),
        i + h / 6.0 * (k1i + 2.0 * k2i + 2.0 * k3i + k4i),
    )


@_jit
def split_step(t_star, t_a, dt):
    """Lengths of the ``v_max`` and zero-control parts of the step starting at ``t_a``.

    Splits only when ``t_a < t_star < t_a + dt``, the same rule the schedule
    stepping uses, so both paths take identical sub-steps.
    """
    if t_star <= t_a:
        return 0.0, dt
    if t_star < t_a + dt:
        h1 = t_star - t_a
        return h1, dt - h1
    return dt, 0.0


@_jit
def integrate_pieces(s, i, n, dt, counts, piece_h, piece_v, beta, gamma, sigma, herd_found):
    """Node values after each step; step ``k`` consists of ``counts[k]`` constant-control pieces.

    Also returns the first piece after which ``s <= sigma`` (or -1), the time
    at its start and the state before it, for event location by the caller.
    """
    s_out = np.empty(n + 1)
    i_out = np.empty(n + 1)
    s_out[0] = s
    i_out[0] = i
    herd_piece = -1
    herd_t = 0.0
    herd_s = 0.0
    herd_i = 0.0
    j = 0
    for k in range(n):
        t_sub = k * dt
        for _ in range(counts[k]):
            h = piece_h[j]
            s_new, i_new = rk4(s, i, piece_v[j], h, beta, gamma)
            if not herd_found and s_new <= sigma:
                herd_found = True
                herd_piece = j
                herd_t = t_sub
                herd_s = s
                herd_i = i
            s = s_new
            i = i_new
            t_sub += h
            j += 1
        s_out[k + 1] = s
        i_out[k + 1] = i
    return s_out, i_out, herd_piece, herd_t, herd_s, herd_i


@_jit
def bang_bang_lanes(s0, i0, t_stars, horizon, n, dt, beta, gamma, v_max):
    """Per switching time: trapezoid integral of ``i`` and its peak node value."""
    m = t_stars.shape[0]
    integral = np.empty(m)
    peak = np.empty(m)
    for lane in range(m):
        t_star = t_stars[lane]
        if t_star >= horizon:
            t_star = np.inf
        s = s0
        i = i0
        trap = 0.0
        top = i
        for k in range(n):
            h1, h2 = split_step(t_star, k * dt, dt)
            i_prev = i
            if h1 > 0:
                s, i = rk4(s, i, v_max, h1, beta, gamma)
            if h2 > 0:
                s, i = rk4(s, i, 0.0, h2, beta, gamma)
            trap = trap + (i_prev + i)
            top = max(top, i)
        integral[lane] = 0.5 * dt * trap
        peak[lane] = top
    return integral, peak


@_jit
def pairwise_trapezoid(values, dt):
    acc = 0.0
    for k in range(values.shape[0] - 1):
        acc += values[k] + values[k + 1]
    return 0.5 * dt * acc
