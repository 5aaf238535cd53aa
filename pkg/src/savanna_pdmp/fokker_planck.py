"""Finite-volume evolution of the density of (w, g).

The density obeys a transport equation along the fire-free vector field
with a nonlocal fire term: mass is lost at rate ``lambda`` and reappears at
the image of its location under the fire map. The discretization uses
first-order upwind fluxes on a uniform grid and moves fire mass from each
source cell onto the cells covered by its image (push form). The resulting
explicit step ``p <- (I + dt A) p`` is a column-stochastic matrix under the
CFL rule, so it conserves mass, keeps densities nonnegative, and contracts
in L1.

No boundary condition is imposed explicitly: the face velocities vanish on
``w = 0``, ``w = 1`` and ``g = 0`` and point inward on ``g = 1``, where
inflow carries zero density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

from .core import ModelParams
from .ensemble import DEFAULT_GRID, DensityGrid
from .errors import CflViolation, DomainError, NegativeDensity, NotConverged

CFL = 0.9
MAX_FIRE_FRACTION = 0.5
NEG_TOL = 1e-15


def overlap_matrix(n: int, factor: float) -> np.ndarray:
    """Fractions of each cell ``[i/n, (i+1)/n]`` landing in cell ``k`` after scaling by ``factor``.

    Entry ``[k, i]``; each column sums to one.
    """
    edges = np.arange(n + 1) / n
    lo, hi = factor * edges[:-1], factor * edges[1:]
    frac = np.clip(
        np.minimum(hi[None, :], edges[1:, None]) - np.maximum(lo[None, :], edges[:-1, None]),
        0.0,
        None,
    )
    return frac / (hi - lo)[None, :]


def _bilinear_matrix(n_w: int, n_g: int, pw: np.ndarray, pg: np.ndarray) -> sp.csr_matrix:
    """Sparse rows interpolating cell-centred values at points ``(pw, pg)``."""
    rows, cols, vals = [], [], []
    for r, (x, y) in enumerate(zip(pw, pg)):
        fx = min(max(x * n_w - 0.5, 0.0), n_w - 1.0)
        fy = min(max(y * n_g - 0.5, 0.0), n_g - 1.0)
        i0, j0 = min(int(fx), n_w - 2), min(int(fy), n_g - 2)
        ax, ay = fx - i0, fy - j0
        for di, wx in ((0, 1 - ax), (1, ax)):
            for dj, wy in ((0, 1 - ay), (1, ay)):
                if wx * wy:
                    rows.append(r)
                    cols.append((j0 + dj) * n_w + i0 + di)
                    vals.append(wx * wy)
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(pw), n_w * n_g))


@dataclass
class FpeGrid:
    """Discrete operator for a given grid and parameter set.

    ``u_faces`` are the w-velocities on the ``n_w + 1`` vertical faces,
    ``v_faces`` the g-velocities on horizontal faces, shape
    ``(n_g + 1, n_w)``. ``redistribution`` maps source-cell mass to
    target cells under the fire map (column-stochastic).
    """

    n_w: int
    n_g: int
    u_faces: np.ndarray
    v_faces: np.ndarray
    lam: np.ndarray
    redistribution: sp.csr_matrix
    generator: sp.csr_matrix
    gain: str

    @property
    def max_exit_rate(self) -> float:
        return float(-self.generator.diagonal().min())

    def stable_dt(self) -> float:
        rate = self.max_exit_rate
        lam_max = float(self.lam.max())
        dt = CFL / rate if rate > 0 else math.inf
        if lam_max > 0:
            dt = min(dt, MAX_FIRE_FRACTION / lam_max)
        return dt


def build_grid(params: ModelParams, n_w: int, n_g: int, gain: str = "push") -> FpeGrid:
    if n_w < 2 or n_g < 2:
        raise DomainError("grid dimensions must be at least 2")
    if gain not in ("push", "pull"):
        raise ValueError(f"gain must be 'push' or 'pull', got {gain!r}")
    hw, hg = 1.0 / n_w, 1.0 / n_g
    wf = np.arange(n_w + 1) * hw
    gf = np.arange(n_g + 1) * hg
    wc = (np.arange(n_w) + 0.5) * hw
    gc = (np.arange(n_g) + 0.5) * hg

    u = params.r_w * wf * (1.0 - wf)
    u[0] = u[-1] = 0.0
    # linear in w, so the centre value is the exact face average
    v = params.r_g * gf[:, None] * (1.0 - gf[:, None] - wc[None, :])
    v[0, :] = 0.0
    # inflow through g = 1 carries zero density
    v[-1, :] = 0.0

    idx = np.arange(n_w * n_g).reshape(n_g, n_w)
    src, dst, rate = [], [], []
    # w faces 1..n_w-1, u >= 0: mass moves from cell i-1 to cell i
    k = u[1:-1] / hw
    src.append(idx[:, :-1].ravel())
    dst.append(idx[:, 1:].ravel())
    rate.append(np.broadcast_to(k, (n_g, n_w - 1)).ravel())
    # g faces 1..n_g-1
    vi = v[1:-1, :]
    up = np.maximum(vi, 0.0) / hg
    down = np.maximum(-vi, 0.0) / hg
    src += [idx[:-1, :].ravel(), idx[1:, :].ravel()]
    dst += [idx[1:, :].ravel(), idx[:-1, :].ravel()]
    rate += [up.ravel(), down.ravel()]
    src, dst, rate = np.concatenate(src), np.concatenate(dst), np.concatenate(rate)
    nz = rate > 0
    n = n_w * n_g
    transport = sp.csr_matrix((rate[nz], (dst[nz], src[nz])), shape=(n, n))

    W, G = np.meshgrid(wc, gc)
    lam = np.asarray(params.intensity(W, G), dtype=float).ravel() * np.ones(n)
    sw, sg = 1.0 - params.M_w, 1.0 - params.M_g
    redistribution = sp.csr_matrix(
        sp.kron(sp.csr_matrix(overlap_matrix(n_g, sg)), sp.csr_matrix(overlap_matrix(n_w, sw)))
    )
    if gain == "push":
        fire_in = redistribution @ sp.diags(lam)
    else:
        pre_w, pre_g = W.ravel() / sw, G.ravel() / sg
        inside = (pre_w <= 1.0) & (pre_g <= 1.0)
        interp = _bilinear_matrix(n_w, n_g, pre_w, pre_g)
        interp = sp.diags(inside / (sw * sg)) @ interp
        fire_in = interp @ sp.diags(lam)

    off = sp.csr_matrix(transport + fire_in)
    off.setdiag(0.0)
    off.eliminate_zeros()
    if gain == "push":
        # exact column sums of zero
        diag = -np.asarray(off.sum(axis=0)).ravel()
    else:
        diag = -np.asarray(transport.sum(axis=0)).ravel() - lam + fire_in.diagonal()
    generator = sp.csr_matrix(off + sp.diags(diag))
    return FpeGrid(n_w, n_g, u, v, lam.reshape(n_g, n_w), redistribution, generator, gain)


class FpeSolver:
    """Explicit time stepper for a fixed grid and step size."""

    def __init__(self, params: ModelParams, n_w: int, n_g: int, dt: Union[float, str] = "auto", gain: str = "push"):
        self.params = params
        self.grid = build_grid(params, n_w, n_g, gain)
        limit = self.grid.stable_dt()
        if dt == "auto":
            dt = limit
        else:
            dt = float(dt)
            if not dt > 0:
                raise DomainError("dt must be positive")
            if dt > limit / CFL * (1 + 1e-12):
                raise CflViolation(f"dt={dt} exceeds the stable limit {limit / CFL:.6g}")
        self.dt = dt
        self._set_step(dt)

    def _set_step(self, dt):
        n = self.grid.n_w * self.grid.n_g
        self._step_dt = dt
        self.matrix = sp.csr_matrix(sp.identity(n) + dt * self.grid.generator)

    def advance(self, p: np.ndarray, T: float, check: bool = True) -> np.ndarray:
        """Advance the flat density vector ``p`` by time ``T``."""
        if T < 0:
            raise DomainError("T must be nonnegative")
        if T == 0:
            return p.copy()
        n_steps = max(1, math.ceil(T / self.dt - 1e-12))
        dt = T / n_steps
        if dt != self._step_dt:
            self._set_step(dt)
        p = p.copy()
        for _ in range(n_steps):
            p = self.matrix @ p
        if check and p.min() < -NEG_TOL:
            raise NegativeDensity(f"density reached {p.min()}")
        return p

    def steps(self, p: np.ndarray, n_steps: int) -> np.ndarray:
        if self._step_dt != self.dt:
            self._set_step(self.dt)
        for _ in range(n_steps):
            p = self.matrix @ p
        return p


def _check_initial(f0: DensityGrid):
    if np.any(f0.values < 0):
        raise DomainError("initial density must be nonnegative")
    if abs(f0.mass() - 1.0) > 1e-9:
        raise DomainError(f"initial density must have unit mass, has {f0.mass()}")


def evolve(
    params: ModelParams,
    f0: DensityGrid,
    T: float,
    dt: Union[float, str] = "auto",
    gain: str = "push",
) -> DensityGrid:
    """Evolve the density ``f0`` for time ``T``."""
    _check_initial(f0)
    if T == 0:
        return DensityGrid(f0.values.copy())
    solver = FpeSolver(params, f0.n_w, f0.n_g, dt, gain)
    p = solver.advance(f0.values.ravel(), T)
    return DensityGrid(p.reshape(f0.values.shape))


@dataclass
class FpeStationary:
    grid: DensityGrid
    residual: float
    t: float
    converged: bool
    degenerate: bool


def stationary_fpe(
    params: ModelParams,
    grid: tuple[int, int] = DEFAULT_GRID,
    residual_tol: float = 1e-8,
    t_max: float = 5000.0,
    f0: Optional[DensityGrid] = None,
    check_interval: float = 1.0,
    gain: str = "push",
) -> FpeStationary:
    """Time-march to a steady density.

    Starts from the uniform density unless ``f0`` is given and stops once
    ``||p(t + check_interval) - p(t)||_1 / check_interval < residual_tol``.
    Raises :class:`NotConverged` with the last iterate after ``t_max``.
    With fire disabled the limit is a point mass in the ``(1, 0)`` corner
    cell; the result is then flagged ``degenerate``.
    """
    if not residual_tol > 0:
        raise DomainError("residual_tol must be positive")
    n_w, n_g = grid
    f0 = DensityGrid.uniform(n_w, n_g) if f0 is None else f0
    if f0.values.shape != (n_g, n_w):
        raise DomainError("f0 does not match the grid")
    _check_initial(f0)
    solver = FpeSolver(params, n_w, n_g, "auto", gain)
    n_check = max(1, round(check_interval / solver.dt))
    span = n_check * solver.dt
    area = 1.0 / (n_w * n_g)
    p = f0.values.ravel().copy()
    t, residual = 0.0, math.inf
    degenerate = not params.fire_enabled
    while t < t_max:
        q = solver.steps(p, n_check)
        t += span
        residual = float(np.abs(q - p).sum() * area / span)
        p = q
        if residual < residual_tol:
            if p.min() < -NEG_TOL:
                raise NegativeDensity(f"density reached {p.min()}")
            return FpeStationary(DensityGrid(p.reshape(n_g, n_w)), residual, t, True, degenerate)
    raise NotConverged(
        f"residual {residual:.3g} above {residual_tol:.3g} at t={t:.6g}",
        last=DensityGrid(p.reshape(n_g, n_w)),
        residual=residual,
        t=t,
    )
