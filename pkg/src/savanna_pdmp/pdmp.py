"""Sample paths of the fire-disturbed tree-grass process.

Between fires the state follows :func:`savanna_pdmp.flow.flow`. The waiting
time to the next fire has survival function ``exp(-Lambda(t))`` along the
current flow, and at a fire both biomasses lose a fixed fraction.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .core import EXTINCT_G, ModelParams, State, as_state, jump
from .errors import DomainError, InvalidBound, TimeOutOfRange
from .flow import DEFAULT_RTOL, flow, time_to_intensity

BOUND_SLACK = 1e-12


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream keyed by ``(seed, index)``.

    Distinct indices give statistically independent streams (via
    ``numpy.random.SeedSequence``), independent of scheduling.
    """

    seed: int
    index: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.seed, self.index]))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


@dataclass(frozen=True)
class FireEvent:
    time: float
    pre_state: State
    post_state: State


@dataclass(frozen=True)
class Segment:
    start_time: float
    start_state: State
    end_time: float
    end_state: State


@dataclass
class Trajectory:
    params: ModelParams
    initial: State
    horizon: float
    events: list[FireEvent] = field(default_factory=list)
    segments: list[Segment] = field(default_factory=list)
    tol: float = DEFAULT_RTOL

    @property
    def final_state(self) -> State:
        return self.segments[-1].end_state

    @property
    def fire_times(self) -> np.ndarray:
        return np.array([e.time for e in self.events])


def _next_fire(params: ModelParams, x: State, gen: np.random.Generator, method: str, t_max: float, tol: float):
    """Return ``(tau, pre_jump_state)`` or ``(None, None)`` when no fire occurs by ``t_max``."""
    if x.g < EXTINCT_G or not params.fire_enabled:
        return None, None
    if method == "inversion":
        level = gen.exponential()
        tau, state = time_to_intensity(params, x, level, t_max, tol=tol)
        return (tau, state) if tau is not None else (None, None)
    if method != "thinning":
        raise ValueError(f"unknown sampling method {method!r}")

    bound = params.lambda_sup
    t = 0.0
    while True:
        cand = gen.exponential(1.0 / bound)
        if t + cand > t_max:
            return None, None
        x = flow(params, x, cand, tol=tol).state
        t += cand
        lam = float(params.intensity(x.w, x.g))
        if lam > bound * (1.0 + BOUND_SLACK):
            raise InvalidBound(f"intensity {lam} at {tuple(x)} exceeds declared bound {bound}")
        if gen.random() * bound < lam:
            return t, x


def sample_jump_time(
    params: ModelParams,
    x,
    rng: Union[RngStream, np.random.Generator],
    method: str = "thinning",
    t_max: float = math.inf,
    tol: float = DEFAULT_RTOL,
) -> Optional[float]:
    """Draw the waiting time to the next fire from state ``x``.

    ``method="thinning"`` proposes candidates at rate ``lambda_sup`` and
    accepts with probability ``lambda/lambda_sup``; ``method="inversion"``
    solves ``Lambda(tau) = E`` with ``E ~ Exp(1)``. Returns ``None`` when
    no fire occurs before ``t_max``. With thinning and ``t_max=inf`` the
    loop only terminates if a fire eventually happens, which is almost sure
    whenever ``g > 0``.
    """
    x = as_state(x)
    if not t_max > 0:
        raise DomainError("t_max must be positive")
    tau, _ = _next_fire(params, x, _as_generator(rng), method, t_max, tol)
    return tau


def simulate(
    params: ModelParams,
    x0,
    horizon: float,
    rng: Union[RngStream, np.random.Generator],
    fire_mode: str = "stochastic",
    tau_fixed: Optional[float] = None,
    method: str = "thinning",
    tol: float = DEFAULT_RTOL,
) -> Trajectory:
    """Simulate one trajectory on ``[0, horizon]``.

    ``fire_mode="periodic"`` puts fires at ``n * tau_fixed`` regardless of
    the intensity, skipping those where no grass is left.
    """
    x = as_state(x0)
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    if fire_mode == "periodic":
        if tau_fixed is None or not tau_fixed > 0:
            raise DomainError("periodic mode needs tau_fixed > 0")
    elif fire_mode != "stochastic":
        raise ValueError(f"unknown fire_mode {fire_mode!r}")
    gen = _as_generator(rng)

    traj = Trajectory(params, x, horizon, tol=tol)
    t = 0.0
    while True:
        remaining = horizon - t
        if fire_mode == "stochastic":
            tau, pre = _next_fire(params, x, gen, method, remaining, tol)
        else:
            n_next = math.floor(t / tau_fixed + 1e-9) + 1
            t_fire = n_next * tau_fixed
            if t_fire <= horizon:
                tau = t_fire - t
                pre = flow(params, x, tau, tol=tol).state
            else:
                tau, pre = None, None
        if tau is None:
            end = flow(params, x, remaining, tol=tol).state
            traj.segments.append(Segment(t, x, horizon, end))
            return traj
        t_fire = t + tau if fire_mode == "stochastic" else t_fire
        traj.segments.append(Segment(t, x, t_fire, pre))
        if pre.g < EXTINCT_G:
            # periodic mode: no grass, no fire
            x = pre
        else:
            x = jump(params, pre)
            traj.events.append(FireEvent(t_fire, pre, x))
        t = t_fire
        if t >= horizon:
            traj.segments.append(Segment(t, x, horizon, x))
            return traj


def snapshot(traj: Trajectory, t: float) -> State:
    """State at time ``t``, right-continuous at fire times."""
    if not 0.0 <= t <= traj.horizon:
        raise TimeOutOfRange(f"t={t} outside [0, {traj.horizon}]")
    starts = [s.start_time for s in traj.segments]
    i = bisect.bisect_right(starts, t) - 1
    seg = traj.segments[max(i, 0)]
    if t == seg.start_time:
        return seg.start_state
    if t == seg.end_time:
        return seg.end_state
    return flow(traj.params, seg.start_state, t - seg.start_time, tol=traj.tol).state


def sample_path(traj: Trajectory, times) -> np.ndarray:
    """States at an array of times, shape ``(len(times), 2)``."""
    return np.array([snapshot(traj, float(t)) for t in times])


CSV_HEADER = ("t", "w", "g", "event")


def trajectory_rows(traj: Trajectory, dt: Optional[float] = None):
    """Rows ``(t, w, g, event)`` with flow samples every ``dt`` and fire rows.

    Each fire contributes a ``fire_pre`` row (state at t-) and a
    ``fire_post`` row (state at t).
    """
    rows = [(0.0, traj.initial.w, traj.initial.g, "flow")]
    for seg in traj.segments:
        if dt:
            n = int(math.floor((seg.end_time - seg.start_time) / dt))
            x, t = seg.start_state, seg.start_time
            for _ in range(n):
                if t + dt >= seg.end_time:
                    break
                x = flow(traj.params, x, dt, tol=traj.tol).state
                t += dt
                rows.append((t, x.w, x.g, "flow"))
    if not (traj.events and traj.events[-1].time == traj.horizon):
        end = traj.final_state
        rows.append((traj.horizon, end.w, end.g, "flow"))
    fire_rows = []
    for ev in traj.events:
        fire_rows.append((ev.time, ev.pre_state.w, ev.pre_state.g, "fire_pre"))
        fire_rows.append((ev.time, ev.post_state.w, ev.post_state.g, "fire_post"))
    order = {"flow": 0, "fire_pre": 1, "fire_post": 2}
    return sorted(rows + fire_rows, key=lambda r: (r[0], order[r[3]]))


def write_trajectory_csv(traj: Trajectory, path, dt: Optional[float] = None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(trajectory_csv(traj, dt))


def trajectory_csv(traj: Trajectory, dt: Optional[float] = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for t, w, g, ev in trajectory_rows(traj, dt):
        writer.writerow((repr(float(t)), repr(float(w)), repr(float(g)), ev))
    return buf.getvalue()


def read_trajectory_csv(path):
    """Read a trajectory CSV into arrays ``t, w, g`` and a list of event labels."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"unexpected header {reader.fieldnames}")
        rows = list(reader)
    t = np.array([float(r["t"]) for r in rows])
    w = np.array([float(r["w"]) for r in rows])
    g = np.array([float(r["g"]) for r in rows])
    return t, w, g, [r["event"] for r in rows]
