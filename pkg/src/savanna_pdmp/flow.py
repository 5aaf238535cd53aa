"""Deterministic dynamics between fires.

Tree biomass follows a logistic law and is evaluated in closed form. Grass
biomass has no elementary solution once ``w`` varies, so it is integrated
with an embedded Dormand-Prince 5(4) pair, with the closed-form ``w(t)``
substituted into its right-hand side. The integrated fire intensity
``Lambda(t) = int_0^t lambda(w(s), g(s)) ds`` is carried as a second
component of the same integration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .core import EXTINCT_G, ModelParams, State, as_state, clamp_state
from .errors import DomainError, IntegratorFailure

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-12
MIN_STEP = 1e-14

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = (
    9017 / 3168,
    -355 / 33,
    46732 / 5247,
    49 / 176,
    -5103 / 18656,
)
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)


@dataclass(frozen=True)
class FlowResult:
    state: State
    integrated_intensity: float
    steps_taken: int


@dataclass(frozen=True)
class Equilibrium:
    location: State
    classification: str
    eigenvalues: tuple[float, float]
    degenerate: bool = False


def logistic(w0: float, r: float, t: float) -> float:
    """Logistic solution with unit capacity, written to avoid overflow."""
    if w0 <= 0.0:
        return 0.0
    if w0 >= 1.0:
        return 1.0
    return w0 / (w0 + (1.0 - w0) * math.exp(-r * t))


def flow_w(params: ModelParams, w0: float, t: float) -> float:
    if not 0.0 <= w0 <= 1.0:
        raise DomainError(f"w0={w0} outside [0,1]")
    if t < 0:
        raise DomainError("t must be nonnegative")
    return logistic(w0, params.r_w, t)


def logistic_array(w0, r: float, t):
    w0 = np.asarray(w0, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = w0 / (w0 + (1.0 - w0) * np.exp(-r * np.asarray(t, dtype=float)))
    return np.where(w0 > 0.0, w, 0.0)


class _Rhs:
    """Right-hand side of the (g, Lambda) system for one starting ``w0``."""

    __slots__ = ("w0", "r_w", "r_g", "lam", "c", "linear")

    def __init__(self, params: ModelParams, w0: float):
        self.w0 = w0
        self.r_w = params.r_w
        self.r_g = params.r_g
        self.lam = params.intensity
        spec = params.intensity
        self.linear = spec.family == "power" and spec.p == 1.0
        self.c = spec.c

    def __call__(self, t, g):
        w0 = self.w0
        if 0.0 < w0 < 1.0:
            w = w0 / (w0 + (1.0 - w0) * math.exp(-self.r_w * t))
        else:
            w = w0
        dg = self.r_g * g * (1.0 - g - w)
        if self.linear:
            return dg, self.c * g
        return dg, float(self.lam(w, g))


def _step(f, t, g, L, h, k1g, k1l):
    """One Dormand-Prince step; returns new values, FSAL slope and error terms."""
    k2g, k2l = f(t + _C2 * h, g + h * _A21 * k1g)
    k3g, k3l = f(t + _C3 * h, g + h * (_A31 * k1g + _A32 * k2g))
    k4g, k4l = f(t + _C4 * h, g + h * (_A41 * k1g + _A42 * k2g + _A43 * k3g))
    k5g, k5l = f(
        t + _C5 * h,
        g + h * (_A51 * k1g + _A52 * k2g + _A53 * k3g + _A54 * k4g),
    )
    k6g, k6l = f(
        t + h,
        g + h * (_A61 * k1g + _A62 * k2g + _A63 * k3g + _A64 * k4g + _A65 * k5g),
    )
    g_new = g + h * (_B1 * k1g + _B3 * k3g + _B4 * k4g + _B5 * k5g + _B6 * k6g)
    L_new = L + h * (_B1 * k1l + _B3 * k3l + _B4 * k4l + _B5 * k5l + _B6 * k6l)
    k7g, k7l = f(t + h, g_new)
    eg = h * (_E1 * k1g + _E3 * k3g + _E4 * k4g + _E5 * k5g + _E6 * k6g + _E7 * k7g)
    el = h * (_E1 * k1l + _E3 * k3l + _E4 * k4l + _E5 * k5l + _E6 * k6l + _E7 * k7l)
    return g_new, L_new, k7g, k7l, eg, el


def _integrate(
    params: ModelParams,
    w0: float,
    g0: float,
    t_end: float,
    rtol: float,
    atol: float,
    target: Optional[float] = None,
):
    """Integrate (g, Lambda) from 0 to ``t_end``.

    With ``target`` set, stops at the first time Lambda reaches it and
    returns that time with ``hit=True``. Returns ``(t, g, Lambda, steps, hit)``.
    """
    f = _Rhs(params, w0)
    t, g, L = 0.0, g0, 0.0
    k1g, k1l = f(0.0, g0)
    h = min(t_end, 0.1 / max(params.r_g, params.r_w, 1.0))
    steps = 0
    while t < t_end:
        h = min(h, t_end - t)
        if h < MIN_STEP * max(1.0, t):
            raise IntegratorFailure(f"step size underflow at t={t} (h={h})")
        g_new, L_new, k7g, k7l, eg, el = _step(f, t, g, L, h, k1g, k1l)
        sg = atol + rtol * max(abs(g), abs(g_new))
        sl = atol + rtol * max(abs(L), abs(L_new))
        err = math.sqrt(0.5 * ((eg / sg) ** 2 + (el / sl) ** 2))
        if not math.isfinite(err):
            h *= 0.2
            continue
        if err <= 1.0:
            steps += 1
            if target is not None and L_new >= target:
                return _locate(f, t, g, L, h, k1g, k1l, target) + (steps, True)
            # landing exactly on t_end avoids a sliver step from round-off
            t = t_end if t_end - (t + h) <= 1e-15 * max(1.0, t) else t + h
            g, L = g_new, L_new
            k1g, k1l = k7g, k7l
            fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err**-0.2))
            h *= fac
        else:
            h *= max(0.2, 0.9 * err**-0.2)
    return t, g, L, steps, False


def _locate(f, t, g, L, h, k1g, k1l, target):
    """Root-solve Lambda(t + s) = target for s in (0, h] by re-stepping."""

    def gap(s):
        return _step(f, t, g, L, s, k1g, k1l)[1] - target

    if L >= target:
        return t, g, L
    s = brentq(gap, 0.0, h, xtol=1e-12, rtol=4 * np.finfo(float).eps)
    g_s, L_s = _step(f, t, g, L, s, k1g, k1l)[:2]
    return t + s, g_s, L_s


def flow(
    params: ModelParams,
    x0,
    t: float,
    tol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> FlowResult:
    """Follow the fire-free dynamics from ``x0`` for time ``t``."""
    w0, g0 = as_state(x0)
    if t < 0:
        raise DomainError("t must be nonnegative")
    if not 0.0 < tol <= 1e-3:
        raise DomainError(f"tol must lie in (0, 1e-3], got {tol}")
    w_t = logistic(w0, params.r_w, t)
    if t == 0.0:
        return FlowResult(State(w0, g0), 0.0, 0)
    if g0 < EXTINCT_G:
        # lambda(w, 0) = 0, so no intensity accumulates
        return FlowResult(clamp_state(w_t, 0.0), 0.0, 0)
    _, g_t, L, steps, _ = _integrate(params, w0, g0, t, tol, atol)
    return FlowResult(clamp_state(w_t, g_t, tol=1e-9), max(L, 0.0), steps)


def time_to_intensity(
    params: ModelParams,
    x0,
    level: float,
    t_max: float,
    tol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
):
    """First time the integrated intensity along the flow reaches ``level``.

    Returns ``(time, state)`` or ``(None, state at t_max)`` if the level is
    not reached by ``t_max``.
    """
    w0, g0 = as_state(x0)
    if g0 < EXTINCT_G or not params.fire_enabled:
        return None, State(logistic(w0, params.r_w, t_max), 0.0 if g0 < EXTINCT_G else g0)
    t, g, _, _, hit = _integrate(params, w0, g0, t_max, tol, atol, target=level)
    state = clamp_state(logistic(w0, params.r_w, t), g, tol=1e-9)
    return (t if hit else None), state


def rk4_flow_array(params: ModelParams, w, g, h, n_sub: int = 1):
    """Vectorized fire-free flow over per-particle durations ``h``.

    ``w`` is advanced in closed form and ``g`` with ``n_sub`` classical RK4
    steps. Used by the ensemble engine, where statistical accuracy is what
    matters; single trajectories use :func:`flow`.
    """
    r_w, r_g = params.r_w, params.r_g
    w = np.asarray(w, dtype=float)
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    dt = h / n_sub
    # precompute (1-w0)/w0 so that w(s) = 1 / (1 + q e^{-r s})
    with np.errstate(divide="ignore"):
        q = np.where(w > 0.0, (1.0 - w) / np.where(w > 0.0, w, 1.0), np.inf)

    def w_at(s):
        with np.errstate(over="ignore"):
            out = 1.0 / (1.0 + q * np.exp(-r_w * s))
        return out

    s = np.zeros_like(h)
    wa = w
    for _ in range(n_sub):
        wm = w_at(s + 0.5 * dt)
        wb = w_at(s + dt)
        k1 = r_g * g * (1.0 - g - wa)
        g2 = g + 0.5 * dt * k1
        k2 = r_g * g2 * (1.0 - g2 - wm)
        g3 = g + 0.5 * dt * k2
        k3 = r_g * g3 * (1.0 - g3 - wm)
        g4 = g + dt * k3
        k4 = r_g * g4 * (1.0 - g4 - wb)
        g = g + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        s = s + dt
        wa = wb
    g = np.clip(g, 0.0, 1.0)
    g[g < EXTINCT_G] = 0.0
    return np.clip(wa, 0.0, 1.0), g


def equilibria(params: ModelParams) -> list[Equilibrium]:
    """The three fire-free equilibria with Jacobian eigenvalues.

    The Jacobian is lower triangular, so its eigenvalues are the diagonal
    entries ``r_w (1 - 2w)`` and ``r_g (1 - 2g - w)``. At (1, 0) the grass
    eigenvalue is exactly zero; attraction in that direction is nonlinear
    (``g' = -r_g g^2`` on the line w = 1) and the point is reported as a
    stable node with ``degenerate=True``.
    """
    out = []
    for w, g in ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0)):
        ev = (params.r_w * (1.0 - 2.0 * w), params.r_g * (1.0 - 2.0 * g - w))
        degenerate = any(e == 0.0 for e in ev)
        if degenerate:
            # the only degenerate case is (1,0), attracting on both axes
            kind = "stable node"
        elif ev[0] > 0 and ev[1] > 0:
            kind = "unstable node"
        elif ev[0] < 0 and ev[1] < 0:
            kind = "stable node"
        else:
            kind = "saddle"
        out.append(Equilibrium(State(w, g), kind, ev, degenerate))
    return out


def phase_curves(params: ModelParams, starts, t_end: float, n_points: int = 200):
    """Sample fire-free solution curves for phase portraits.

    Returns a list of ``(t, w, g)`` array triples, one per start point.
    """
    ts = np.linspace(0.0, t_end, n_points)
    curves = []
    for x in starts:
        w = np.empty(n_points)
        g = np.empty(n_points)
        state = as_state(x)
        w[0], g[0] = state
        for i in range(1, n_points):
            state = flow(params, state, ts[i] - ts[i - 1]).state
            w[i], g[i] = state
        curves.append((ts.copy(), w, g))
    return curves
