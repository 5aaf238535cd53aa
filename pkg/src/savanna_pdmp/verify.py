"""Numerical certificates for the objects used in the stability argument.

* the Lyapunov (Hasminskii) function ``V(w, g) = -log w - log g`` and the
  value of the extended generator on it,
* the pair of vectors whose linear independence gives the local lower bound
  on the transition densities,
* an explicit sequence of flow times and fires steering any interior point
  into a small ball around a point on the unstable manifold of (0, 1).

These are checks on grids and sample points, not proofs. Norms are
Euclidean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .core import ModelParams, State, as_state, drift, jump
from .ensemble import propagate
from .errors import DomainError, InvalidResolution, NoDeltaFound, ScheduleNotFound
from .flow import flow, logistic

NORM = "euclidean"


def hasminskii_value(params: ModelParams, x) -> float:
    w, g = float(x[0]), float(x[1])
    if not (w > 0 and g > 0):
        raise DomainError("V = -log w - log g is undefined on the axes")
    log_keep = math.log1p(-params.M_w) + math.log1p(-params.M_g)
    lam = float(params.intensity(w, g))
    return -params.r_w * (1.0 - w) - params.r_g * (1.0 - w - g) - lam * log_keep


def hasminskii_array(params: ModelParams, w, g):
    w = np.asarray(w, dtype=float)
    g = np.asarray(g, dtype=float)
    log_keep = math.log1p(-params.M_w) + math.log1p(-params.M_g)
    lam = np.asarray(params.intensity(w, g), dtype=float)
    return -params.r_w * (1.0 - w) - params.r_g * (1.0 - w - g) - lam * log_keep


def lyapunov(x) -> float:
    return -math.log(x[0]) - math.log(x[1])


@dataclass(frozen=True)
class DriftReport:
    sup_value: float
    inf_value: float
    delta: float
    threshold: float
    resolution: int
    norm: str = NORM


def find_delta(params: ModelParams, resolution: int = 400) -> DriftReport:
    """Largest grid-certified radius on which ``LV <= -(r_w + r_g)/2``.

    ``LV`` is sampled at ``(i/resolution, j/resolution)``, ``1 <= i, j <=
    resolution``. The returned ``delta`` is the norm of the closest sampled
    point violating the bound (or the largest sampled norm below one).
    """
    if not isinstance(resolution, (int, np.integer)) or resolution < 2:
        raise InvalidResolution(f"resolution must be an integer >= 2, got {resolution!r}")
    axis = np.arange(1, resolution + 1) / resolution
    W, G = np.meshgrid(axis, axis)
    lv = hasminskii_array(params, W, G)
    if not np.all(np.isfinite(lv)):
        raise NoDeltaFound("LV is not finite on the sample grid")
    threshold = -(params.r_w + params.r_g) / 2.0
    norms = np.hypot(W, G)
    bad = lv > threshold
    first_bad = norms[bad].min() if bad.any() else math.inf
    inside = norms < 1.0
    if first_bad <= norms.min():
        raise NoDeltaFound(
            "bound fails at the sample point closest to the origin",
            {"closest_value": float(lv.flat[norms.argmin()]), "threshold": threshold},
        )
    delta = min(first_bad, float(norms[inside].max()))
    return DriftReport(float(lv.max()), float(lv.min()), float(delta), threshold, int(resolution))


def condition_k_vectors(params: ModelParams, x0):
    """Return ``(v1, v2, det)`` for the two-fire construction at ``x0``.

    With ``x1 = S(x0)``, ``x2 = S(x1)`` and ``b`` the drift,
    ``v1 = S^2 b(x0) - b(x2)`` and ``v2 = S b(x1) - b(x2)``.
    """
    w, g = float(x0[0]), float(x0[1])
    if not (0 < w <= 1 and 0 < g <= 1):
        raise DomainError("x0 must lie in (0,1]^2")
    sw, sg = 1.0 - params.M_w, 1.0 - params.M_g
    x1 = jump(params, (w, g))
    x2 = jump(params, x1)
    b0, b1, b2 = drift(params, (w, g)), drift(params, x1), drift(params, x2)
    v1 = np.array([sw * sw * b0[0] - b2[0], sg * sg * b0[1] - b2[1]])
    v2 = np.array([sw * b1[0] - b2[0], sg * b1[1] - b2[1]])
    return v1, v2, float(v1[0] * v2[1] - v1[1] * v2[0])


def condition_k_determinants(params: ModelParams, w, g) -> np.ndarray:
    """Vectorized determinant of :func:`condition_k_vectors`."""
    w = np.asarray(w, dtype=float)
    g = np.asarray(g, dtype=float)
    sw, sg = 1.0 - params.M_w, 1.0 - params.M_g

    def b(a, c):
        return params.r_w * a * (1 - a), params.r_g * c * (1 - c - a)

    b0 = b(w, g)
    b1 = b(sw * w, sg * g)
    b2 = b(sw * sw * w, sg * sg * g)
    v1 = (sw * sw * b0[0] - b2[0], sg * sg * b0[1] - b2[1])
    v2 = (sw * b1[0] - b2[0], sg * b1[1] - b2[1])
    return v1[0] * v2[1] - v1[1] * v2[0]


def unstable_manifold_point(params: ModelParams, w_target: float = 0.9, offset: float = 1e-9) -> State:
    """Point with tree biomass ``w_target`` on the curve leaving the saddle (0, 1).

    Starts ``offset`` away from the saddle along the unstable eigenvector
    ``(1, -r_g/(r_w + r_g))`` and follows the flow.
    """
    if not offset < w_target < 1:
        raise DomainError("w_target must lie in (offset, 1)")
    start = (offset, 1.0 - offset * params.r_g / (params.r_w + params.r_g))
    t = math.log(w_target * (1 - offset) / (offset * (1 - w_target))) / params.r_w
    return flow(params, start, t).state


@dataclass(frozen=True)
class JumpSchedule:
    """``n`` fires with flow times ``times[0..n-1]`` before them and a final flow ``times[n]``."""

    start: State
    target: State
    epsilon: float
    times: tuple[float, ...]
    terminal: State
    distance: float

    @property
    def n(self) -> int:
        return len(self.times) - 1


def replay(params: ModelParams, x, times) -> State:
    """Apply flow/fire alternately along ``times``; no fire after the last flow."""
    state = as_state(x)
    for i, s in enumerate(times):
        state = flow(params, state, s).state
        if i < len(times) - 1:
            state = jump(params, state)
    return state


def _closest_approach(params, x, x0, horizon, dt=0.05):
    """Time in (0, horizon] at which the flow from ``x`` comes closest to ``x0``."""
    n = max(2, math.ceil(horizon / dt))
    state, best_s, best_d = x, None, math.inf
    s = 0.0
    step = horizon / n
    for _ in range(n):
        state = flow(params, state, step).state
        s += step
        d = math.hypot(state.w - x0[0], state.g - x0[1])
        if d < best_d:
            best_s, best_d = s, d

    def dist(u):
        y = flow(params, x, u).state
        return math.hypot(y.w - x0[0], y.g - x0[1])

    lo, hi = max(best_s - step, 1e-12), best_s + step
    res = minimize_scalar(dist, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    if res.fun < best_d:
        best_s, best_d = float(res.x), float(res.fun)
    return best_s, best_d


def reach_ball(
    params: ModelParams,
    x,
    x0=None,
    epsilon: float = 0.05,
    budget: int = 2000,
    pause: Optional[float] = None,
) -> JumpSchedule:
    """Steer ``x`` into the ball of radius ``epsilon`` around ``x0``.

    Alternates short flows of length ``pause`` (default ``0.1 / r_g``) with
    fires, which contract the state toward the origin while shrinking the
    ratio ``w/g``. Every time the norm has halved, a final flow is tried;
    the first one passing within ``epsilon`` of ``x0`` ends the schedule.
    The schedule is replayed through :func:`flow` and
    :func:`~savanna_pdmp.core.jump` before it is returned.
    """
    x = as_state(x)
    if not (x.w > 0 and x.g > 0):
        raise DomainError("x must lie in (0,1]^2")
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    x0 = unstable_manifold_point(params) if x0 is None else as_state(x0)
    pause = 0.1 / params.r_g if pause is None else pause

    times: list[float] = []
    state = x
    next_try = math.inf
    best = math.inf
    for n in range(budget + 1):
        norm = math.hypot(*state)
        if n == 0 or norm <= next_try:
            horizon = (abs(math.log(state.w)) + 20.0) / params.r_w
            if n == 0:
                horizon = max(horizon, 1.0)
            s, d = _closest_approach(params, state, x0, horizon)
            best = min(best, d)
            if d < epsilon:
                candidate = tuple(times) + (s,)
                terminal = replay(params, x, candidate)
                dist = math.hypot(terminal.w - x0.w, terminal.g - x0.g)
                if dist < epsilon:
                    return JumpSchedule(x, x0, epsilon, candidate, terminal, dist)
            next_try = norm / 2.0
        if n == budget:
            break
        state = jump(params, flow(params, state, pause).state)
        times.append(pause)
        if state.w == 0.0 or state.g == 0.0:
            break
    raise ScheduleNotFound(
        f"no schedule within {budget} fires reaches epsilon={epsilon}",
        budget=budget,
        best_distance=best,
    )


def generator_estimate(
    params: ModelParams,
    x,
    h: float = 0.01,
    n: int = 100_000,
    seed: int = 7,
):
    """Monte Carlo estimate of ``(E V(xi(h)) - V(x)) / h`` and its standard error."""
    x = as_state(x)
    W, G = propagate(params, np.full(n, x.w), np.full(n, x.g), [h], seed, max_step=h)
    diffs = (-np.log(W[0]) - np.log(G[0]) - lyapunov(x)) / h
    return float(diffs.mean()), float(diffs.std(ddof=1) / math.sqrt(n))


def certificate_report(
    params: ModelParams,
    n_points: int = 10_000,
    n_reach: int = 20,
    epsilon: float = 0.05,
    seed: int = 11,
    resolution: int = 400,
) -> dict:
    """All certificates for one parameter set as a flat record."""
    rng = np.random.default_rng(seed)
    drift_report = find_delta(params, resolution)
    pts = 0.01 + 0.99 * rng.random((n_points, 2))
    dets = np.abs(condition_k_determinants(params, pts[:, 0], pts[:, 1]))
    x0 = unstable_manifold_point(params)
    errors = []
    for _ in range(n_reach):
        start = 0.01 + 0.99 * rng.random(2)
        errors.append(reach_ball(params, start, x0, epsilon).distance)
    return {
        "norm": NORM,
        "lv_origin_limit": -(params.r_w + params.r_g),
        "lv_sup": drift_report.sup_value,
        "delta": drift_report.delta,
        "delta_resolution": drift_report.resolution,
        "k_points": n_points,
        "k_min_abs_det": float(dets.min()),
        "reach_instances": n_reach,
        "reach_epsilon": epsilon,
        "reach_max_replay_error": float(max(errors)),
    }
