"""Monte Carlo estimation of the law of the process.

Many trajectories are advanced together with numpy. Each trajectory draws
from its own :class:`~savanna_pdmp.pdmp.RngStream` (``seed``, ``index``),
so results are independent of how particles are split into chunks or
across worker processes. Fire times are sampled by thinning against
``lambda_sup``; between candidates the flow is advanced with closed-form
``w`` and RK4 in ``g`` on steps of at most ``max_step``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .core import EXTINCT_G, ModelParams, State, as_state
from .errors import DomainError, GridMismatch, InvalidBound
from .flow import rk4_flow_array
from .kvfile import FORMAT_VERSION, floats, read_kv, write_kv
from .pdmp import BOUND_SLACK, RngStream

DEFAULT_GRID = (64, 64)
DEFAULT_N = 100_000
DEFAULT_SEED = 20190601
MAX_STEP = 0.25
#: SeedSequence key reserved for sampling initial conditions
INITIAL_STREAM = 2**32 - 1


@dataclass
class DensityGrid:
    """Cell-averaged density on a uniform grid over the unit square.

    ``values`` has shape ``(n_g, n_w)``: row ``j`` is the ``j``-th grass
    cell. ``boundary_mass`` is probability held on ``{w=0}`` or ``{g=0}``
    and therefore not in the grid.
    """

    values: np.ndarray
    boundary_mass: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or min(self.values.shape) < 1:
            raise ValueError("values must be a 2-D array")

    @property
    def n_w(self) -> int:
        return self.values.shape[1]

    @property
    def n_g(self) -> int:
        return self.values.shape[0]

    @property
    def cell_area(self) -> float:
        return 1.0 / (self.n_w * self.n_g)

    def mass(self) -> float:
        return float(self.values.sum() * self.cell_area)

    def cell_masses(self) -> np.ndarray:
        return self.values * self.cell_area

    def centers(self):
        wc = (np.arange(self.n_w) + 0.5) / self.n_w
        gc = (np.arange(self.n_g) + 0.5) / self.n_g
        return wc, gc

    @classmethod
    def uniform(cls, n_w: int, n_g: int) -> "DensityGrid":
        return cls(np.ones((n_g, n_w)))

    @classmethod
    def point(cls, n_w: int, n_g: int, x) -> "DensityGrid":
        """Unit mass in the single cell containing ``x``."""
        v = np.zeros((n_g, n_w))
        i, j = _cell_index(np.array([x[0]]), n_w)[0], _cell_index(np.array([x[1]]), n_g)[0]
        v[j, i] = n_w * n_g
        return cls(v)

    @classmethod
    def from_samples(cls, w, g, n_w: int, n_g: int, total: Optional[int] = None) -> "DensityGrid":
        """Histogram of interior samples, normalized by ``total`` (default: all samples).

        Samples with ``w == 0`` or ``g == 0`` are counted as boundary mass.
        """
        w = np.asarray(w, dtype=float).ravel()
        g = np.asarray(g, dtype=float).ravel()
        total = w.size if total is None else total
        on_boundary = (w == 0.0) | (g == 0.0)
        wi, gi = w[~on_boundary], g[~on_boundary]
        counts = np.zeros((n_g, n_w))
        np.add.at(counts, (_cell_index(gi, n_g), _cell_index(wi, n_w)), 1.0)
        values = counts * (n_w * n_g) / total
        return cls(values, boundary_mass=float(on_boundary.sum()) / total)


def _cell_index(x, n):
    return np.minimum((x * n).astype(np.int64), n - 1)


def l1_distance(a: DensityGrid, b: DensityGrid) -> float:
    """Integrated absolute difference of two grid densities (interior only)."""
    if a.values.shape != b.values.shape:
        raise GridMismatch(f"grid shapes differ: {a.values.shape} vs {b.values.shape}")
    return float(np.abs(a.values - b.values).sum() * a.cell_area)


def write_grid(path, grid: DensityGrid) -> None:
    lines = [f"{grid.n_w} {grid.n_g}"]
    for row in grid.values:
        lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_grid(path) -> DensityGrid:
    rows = Path(path).read_text().split("\n")
    n_w, n_g = (int(v) for v in rows[0].split())
    values = np.array([[float(v) for v in r.split()] for r in rows[1 : 1 + n_g]])
    if values.shape != (n_g, n_w):
        raise ValueError(f"{path}: expected {n_g} rows of {n_w} values")
    return DensityGrid(values)


class _UniformPool:
    """Per-particle uniform draws, buffered in blocks."""

    def __init__(self, seed: int, indices: np.ndarray, block: int = 64):
        self.gens = [RngStream(seed, int(i)).generator() for i in indices]
        self.block = block
        self.buf = np.empty((len(indices), block))
        for r, gen in enumerate(self.gens):
            self.buf[r] = gen.random(block)
        self.ptr = np.zeros(len(indices), dtype=np.int64)

    def draw(self, rows: np.ndarray) -> np.ndarray:
        stale = rows[self.ptr[rows] >= self.block]
        for r in stale:
            self.buf[r] = self.gens[r].random(self.block)
        self.ptr[stale] = 0
        u = self.buf[rows, self.ptr[rows]]
        self.ptr[rows] += 1
        return u


def propagate(
    params: ModelParams,
    w0,
    g0,
    times: Sequence[float],
    seed: int,
    indices=None,
    max_step: float = MAX_STEP,
):
    """Advance particles and record their states at each of ``times``.

    Particle ``k`` uses the stream ``RngStream(seed, indices[k])``.
    Returns arrays ``(W, G)`` of shape ``(len(times), n_particles)``.
    """
    w = np.array(w0, dtype=float, copy=True).ravel()
    g = np.array(g0, dtype=float, copy=True).ravel()
    n = w.size
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(np.diff(times) < 0) or (times.size and times[0] < 0):
        raise DomainError("times must be a sorted list of nonnegative numbers")
    indices = np.arange(n) if indices is None else np.asarray(indices)
    out_w = np.empty((times.size, n))
    out_g = np.empty((times.size, n))
    if n == 0 or times.size == 0:
        return out_w, out_g

    pool = _UniformPool(seed, indices)
    bound = params.lambda_sup
    fires = params.fire_enabled and bound > 0
    one_w, one_g = 1.0 - params.M_w, 1.0 - params.M_g

    pid = np.arange(n)
    t = np.zeros(n)
    k = np.zeros(n, dtype=np.int64)
    wait = np.full(n, np.inf)
    if fires:
        live = g > 0
        wait[live] = -np.log1p(-pool.draw(pid[live])) / bound

    while pid.size:
        t_snap = times[k]
        h_snap = t_snap - t
        # with no grass the flow is exact in closed form, so no step cap
        cap = np.where(g > 0, max_step, np.inf)
        h = np.minimum(np.minimum(wait, cap), h_snap)
        moving = h > 0
        if moving.all():
            w, g = rk4_flow_array(params, w, g, h)
        elif moving.any():
            w_m, g_m = rk4_flow_array(params, w[moving], g[moving], h[moving])
            w[moving] = w_m
            g[moving] = g_m
        wait = wait - h
        is_snap = h_snap <= h
        t = np.where(is_snap, t_snap, t + h)

        is_cand = (wait <= 0) & ~np.isinf(wait)
        if is_cand.any():
            rows = np.flatnonzero(is_cand)
            u = pool.draw(pid[rows])
            lam = np.asarray(params.intensity(w[rows], g[rows]), dtype=float)
            if np.any(lam > bound * (1.0 + BOUND_SLACK)):
                raise InvalidBound(f"intensity {lam.max()} exceeds declared bound {bound}")
            fire = u * bound < lam
            fr = rows[fire]
            w[fr] *= one_w
            g[fr] *= one_g
            g[fr[g[fr] < EXTINCT_G]] = 0.0
            still = g[rows] > 0
            new_wait = np.full(rows.size, np.inf)
            if still.any():
                new_wait[still] = -np.log1p(-pool.draw(pid[rows[still]])) / bound
            wait[rows] = new_wait

        if is_snap.any():
            rows = np.flatnonzero(is_snap)
            # several snapshot times may coincide
            while rows.size:
                out_w[k[rows], pid[rows]] = w[rows]
                out_g[k[rows], pid[rows]] = g[rows]
                k[rows] += 1
                nxt = k[rows] < times.size
                rows = rows[nxt]
                rows = rows[times[k[rows]] <= t[rows]]
            done = k >= times.size
            if done.any():
                keep = ~done
                pid, w, g, t, k, wait = pid[keep], w[keep], g[keep], t[keep], k[keep], wait[keep]
    return out_w, out_g


def _propagate_chunk(args):
    return propagate(*args[:5], indices=args[5], max_step=args[6])


def propagate_parallel(params, w0, g0, times, seed, workers: int = 1, max_step: float = MAX_STEP):
    """:func:`propagate` split over worker processes; identical output for any ``workers``."""
    w0 = np.asarray(w0, dtype=float).ravel()
    g0 = np.asarray(g0, dtype=float).ravel()
    n = w0.size
    if workers <= 1 or n < 2:
        return propagate(params, w0, g0, times, seed, max_step=max_step)
    bounds = np.linspace(0, n, min(workers, n) + 1).astype(int)
    jobs = [
        (params, w0[a:b], g0[a:b], times, seed, np.arange(a, b), max_step)
        for a, b in zip(bounds[:-1], bounds[1:])
    ]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        parts = list(ex.map(_propagate_chunk, jobs))
    return np.concatenate([p[0] for p in parts], axis=1), np.concatenate([p[1] for p in parts], axis=1)


@dataclass
class EnsembleReport:
    times: list[float]
    grids: list[DensityGrid]
    boundary_mass: list[float]
    n: int
    seed: int
    boundary_w0: list[float] = field(default_factory=list)
    boundary_g0: list[float] = field(default_factory=list)
    states: Optional[tuple[np.ndarray, np.ndarray]] = field(default=None, repr=False)

    def grid_at(self, t: float) -> DensityGrid:
        return self.grids[self.times.index(t)]


InitialCondition = Union[State, tuple, Callable[[np.random.Generator, int], tuple]]


def initial_samples(initial: InitialCondition, n: int, seed: int):
    """Expand a point or a sampler ``f(rng, n) -> (w, g)`` into arrays."""
    if callable(initial):
        rng = np.random.default_rng(np.random.SeedSequence([seed, INITIAL_STREAM]))
        w, g = initial(rng, n)
        w = np.asarray(w, dtype=float)
        g = np.asarray(g, dtype=float)
        if w.shape != (n,) or g.shape != (n,):
            raise DomainError("initial sampler must return two arrays of length n")
        if np.any((w < 0) | (w > 1) | (g < 0) | (g > 1)):
            raise DomainError("initial sampler produced states outside [0,1]^2")
        return w, g
    x = as_state(initial)
    return np.full(n, x.w), np.full(n, x.g)


def run_ensemble(
    params: ModelParams,
    initial: InitialCondition,
    n: int = DEFAULT_N,
    times: Sequence[float] = (0.0,),
    grid: tuple[int, int] = DEFAULT_GRID,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
    max_step: float = MAX_STEP,
    keep_states: bool = False,
) -> EnsembleReport:
    """Histogram ``n`` independent trajectories at each snapshot time."""
    if n < 1:
        raise DomainError("n must be at least 1")
    n_w, n_g = grid
    if n_w < 2 or n_g < 2:
        raise DomainError("grid dimensions must be at least 2")
    times = [float(t) for t in times]
    w0, g0 = initial_samples(initial, n, seed)
    W, G = propagate_parallel(params, w0, g0, times, seed, workers=workers, max_step=max_step)
    grids, bmass, bw, bg = [], [], [], []
    for i in range(len(times)):
        grids.append(DensityGrid.from_samples(W[i], G[i], n_w, n_g))
        bmass.append(grids[-1].boundary_mass)
        bw.append(float(np.count_nonzero(W[i] == 0.0)) / n)
        bg.append(float(np.count_nonzero(G[i] == 0.0)) / n)
    return EnsembleReport(
        times, grids, bmass, n, seed, bw, bg, states=(W, G) if keep_states else None
    )


def write_report(directory, report: EnsembleReport) -> None:
    """Write one grid file per snapshot time plus ``manifest.txt``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    names = []
    for i, grid in enumerate(report.grids):
        name = f"grid_{i:04d}.txt"
        write_grid(d / name, grid)
        names.append(name)
    write_kv(
        d / "manifest.txt",
        {
            "format_version": FORMAT_VERSION,
            "kind": "ensemble",
            "n": report.n,
            "seed": report.seed,
            "n_w": report.grids[0].n_w if report.grids else 0,
            "n_g": report.grids[0].n_g if report.grids else 0,
            "times": [float(t) for t in report.times],
            "boundary_mass": [float(b) for b in report.boundary_mass],
            "boundary_mass_w0": [float(b) for b in report.boundary_w0],
            "boundary_mass_g0": [float(b) for b in report.boundary_g0],
            "grids": names,
        },
    )


def read_report(directory) -> EnsembleReport:
    d = Path(directory)
    m = read_kv(d / "manifest.txt")
    times = floats(m["times"])
    bmass = floats(m["boundary_mass"])
    grids = []
    for name, b in zip(m["grids"].split(), bmass):
        grid = read_grid(d / name)
        grid.boundary_mass = b
        grids.append(grid)
    return EnsembleReport(
        times,
        grids,
        bmass,
        int(m["n"]),
        int(m["seed"]),
        floats(m.get("boundary_mass_w0", "")),
        floats(m.get("boundary_mass_g0", "")),
    )


@dataclass
class StationaryEstimate:
    grid: DensityGrid
    mode: str
    samples: tuple[np.ndarray, np.ndarray] = field(repr=False)
    alternative: Optional[DensityGrid] = None
    cross_l1: Optional[float] = None


def stationary_estimate(
    params: ModelParams,
    burn_in: float = 500.0,
    n_samples: int = DEFAULT_N,
    interval: float = 1.0,
    grid: tuple[int, int] = DEFAULT_GRID,
    seed: int = DEFAULT_SEED,
    mode: str = "ensemble",
    initial: InitialCondition = (0.1, 0.2),
    n_chains: int = 100,
    workers: int = 1,
    max_step: float = MAX_STEP,
) -> StationaryEstimate:
    """Estimate the stationary density.

    ``mode="ensemble"``: ``n_samples`` independent trajectories observed once
    at ``burn_in``. ``mode="time-average"``: ``n_chains`` long trajectories,
    each observed every ``interval`` after ``burn_in`` until ``n_samples``
    observations are collected. ``mode="both"`` runs the two and reports
    their L1 distance; the ensemble grid is the primary result.
    """
    if not burn_in > 0 or not interval > 0:
        raise DomainError("burn_in and interval must be positive")
    if mode not in ("ensemble", "time-average", "both"):
        raise ValueError(f"unknown mode {mode!r}")
    n_w, n_g = grid

    def by_ensemble():
        w0, g0 = initial_samples(initial, n_samples, seed)
        W, G = propagate_parallel(params, w0, g0, [burn_in], seed, workers=workers, max_step=max_step)
        return DensityGrid.from_samples(W[0], G[0], n_w, n_g), (W[0], G[0])

    def by_time_average():
        chains = max(1, min(n_chains, n_samples))
        per_chain = math.ceil(n_samples / chains)
        w0, g0 = initial_samples(initial, chains, seed + 1)
        times = burn_in + interval * np.arange(per_chain)
        W, G = propagate_parallel(params, w0, g0, times, seed + 1, workers=workers, max_step=max_step)
        w, g = W.ravel()[:n_samples], G.ravel()[:n_samples]
        return DensityGrid.from_samples(w, g, n_w, n_g), (w, g)

    if mode == "ensemble":
        est, samples = by_ensemble()
        return StationaryEstimate(est, mode, samples)
    if mode == "time-average":
        est, samples = by_time_average()
        return StationaryEstimate(est, mode, samples)
    est, samples = by_ensemble()
    alt, _ = by_time_average()
    return StationaryEstimate(est, mode, samples, alt, l1_distance(est, alt))


@dataclass
class Density1D:
    """Cell-averaged density of grass biomass on ``(0, 1]``."""

    values: np.ndarray
    n_samples: int

    @property
    def n_cells(self) -> int:
        return self.values.size

    def mass(self) -> float:
        return float(self.values.sum() / self.n_cells)

    def mean(self) -> float:
        centers = (np.arange(self.n_cells) + 0.5) / self.n_cells
        return float((self.values * centers).sum() / self.n_cells / max(self.mass(), 1e-300))


def l1_distance_1d(a: Density1D, b: Density1D) -> float:
    if a.values.shape != b.values.shape:
        raise GridMismatch("1-D grids differ")
    return float(np.abs(a.values - b.values).sum() / a.n_cells)


def _boundary_samples(params: ModelParams, burn_in: float, n: int, seed: int, g0: float):
    """States at ``burn_in`` of the process restricted to ``w = 0``.

    On that line grass is logistic, so the flow is exact and thinning
    candidates can be followed without a step cap.
    """
    r, bound, keep = params.r_g, params.lambda_sup, 1.0 - params.M_g
    pid = np.arange(n)
    pool = _UniformPool(seed, pid)
    g = np.full(n, float(g0))
    t = np.zeros(n)
    out = np.empty(n)
    if bound <= 0 or not params.fire_enabled:
        return 1.0 / (1.0 + (1.0 - g) / g * np.exp(-r * burn_in))
    active = pid
    while active.size:
        cand = -np.log1p(-pool.draw(active)) / bound
        remaining = burn_in - t[active]
        finished = cand >= remaining
        h = np.minimum(cand, remaining)
        ga = g[active]
        ga = ga / (ga + (1.0 - ga) * np.exp(-r * h))
        t[active] += h
        out[active[finished]] = ga[finished]
        u = pool.draw(active)
        lam = np.asarray(params.intensity(np.zeros_like(ga), ga), dtype=float)
        if np.any(lam > bound * (1.0 + BOUND_SLACK)):
            raise InvalidBound(f"intensity {lam.max()} exceeds declared bound {bound}")
        ga = np.where(~finished & (u * bound < lam), keep * ga, ga)
        g[active] = ga
        active = active[~finished]
    return out


def boundary_stationary_1d(
    params: ModelParams,
    burn_in: float = 500.0,
    n_samples: int = DEFAULT_N,
    n_cells: int = 64,
    seed: int = DEFAULT_SEED,
    g0: float = 0.5,
) -> Density1D:
    """Stationary density of grass on the tree-free line ``w = 0``.

    ``n_samples`` independent copies of the restricted process are run from
    ``g0`` to ``burn_in`` and histogrammed on ``n_cells`` cells.
    """
    if not 0.0 < g0 <= 1.0:
        raise DomainError("the restricted process is defined for g0 in (0, 1]")
    if not burn_in > 0 or n_samples < 1 or n_cells < 2:
        raise DomainError("need burn_in > 0, n_samples >= 1, n_cells >= 2")
    g = _boundary_samples(params, burn_in, n_samples, seed, g0)
    inside = g > 0
    counts = np.bincount(_cell_index(g[inside], n_cells), minlength=n_cells).astype(float)
    return Density1D(counts * n_cells / n_samples, n_samples)


def noise_floor(estimate: Callable[[int], object], distance: Callable, seeds=(101, 202)) -> float:
    """Sampling noise calibrated by fresh-seed repetition.

    Runs ``estimate(seed)`` for two seeds not used elsewhere and returns the
    distance between the two estimates.
    """
    a, b = (estimate(s) for s in seeds)
    return float(distance(a, b))
