"""Model parameters, state type and the primitive maps of the tree-grass model.

All computation happens in normalized coordinates: ``w`` is tree biomass and
``g`` grass biomass, each divided by its carrying capacity, so the state
lives in the unit square. Carrying capacities are kept on ``ModelParams``
only for converting to and from absolute biomass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple, Optional

import numpy as np

from .errors import (
    DomainConsistencyError,
    IntensityViolatesAssumptions,
    LossFractionOutOfRange,
    NonPositiveRate,
    ParameterError,
)

CLAMP_TOL = 1e-12
#: grass below this is treated as extinct
EXTINCT_G = 1e-300
VALIDATION_POINTS = 101


class State(NamedTuple):
    w: float
    g: float


def clamp_state(w: float, g: float, tol: float = CLAMP_TOL) -> State:
    """Clamp a numerically computed state onto the unit square.

    Excursions larger than ``tol`` are treated as bugs and raise.
    """
    if not (-tol <= w <= 1.0 + tol and -tol <= g <= 1.0 + tol):
        raise DomainConsistencyError(f"state ({w!r}, {g!r}) left the unit square")
    w = min(max(w, 0.0), 1.0)
    g = min(max(g, 0.0), 1.0)
    if g < EXTINCT_G:
        g = 0.0
    return State(w, g)


def as_state(x) -> State:
    w, g = float(x[0]), float(x[1])
    if not (0.0 <= w <= 1.0 and 0.0 <= g <= 1.0):
        raise ParameterError(f"state ({w}, {g}) is outside [0,1]^2")
    return State(w, g)


@dataclass(frozen=True)
class IntensitySpec:
    """Fire intensity as a function of the state.

    ``family="power"`` gives ``c * g**p``. ``family="custom"`` wraps a user
    function ``func(w, g)``; it should accept numpy arrays, and ``sup`` must
    bound it on the unit square. ``family="none"`` switches fire off; it
    violates the positivity assumption and is only meant for degenerate
    comparison runs.
    """

    family: str = "power"
    c: float = 1.0
    p: float = 1.0
    func: Optional[Callable] = field(default=None, compare=False)
    sup: Optional[float] = None

    @classmethod
    def power(cls, c: float = 1.0, p: float = 1.0) -> "IntensitySpec":
        return cls("power", c=float(c), p=float(p))

    @classmethod
    def custom(cls, func: Callable, sup: float) -> "IntensitySpec":
        return cls("custom", func=func, sup=float(sup))

    @classmethod
    def none(cls) -> "IntensitySpec":
        return cls("none", c=0.0)

    def __call__(self, w, g):
        if self.family == "power":
            if self.p == 1.0:
                return self.c * g
            return self.c * g**self.p
        if self.family == "none":
            return 0.0 * g
        return self.func(w, g)

    def bound(self) -> float:
        """Declared supremum over the unit square."""
        if self.sup is not None:
            return float(self.sup)
        if self.family == "power":
            return self.c
        if self.family == "none":
            return 0.0
        raise ParameterError("custom intensity needs a declared sup")


@dataclass(frozen=True)
class ModelParams:
    r_w: float
    r_g: float
    M_w: float
    M_g: float
    intensity: IntensitySpec = field(default_factory=IntensitySpec)
    lambda_sup: Optional[float] = None
    K_w: float = 1.0
    K_g: float = 1.0

    def __post_init__(self):
        if self.lambda_sup is None:
            object.__setattr__(self, "lambda_sup", self.intensity.bound())
        _check(self)

    @property
    def fire_enabled(self) -> bool:
        return self.intensity.family != "none"

    def lam(self, w, g):
        return self.intensity(w, g)

    def to_normalized(self, W, G):
        return W / self.K_w, G / self.K_g

    def from_normalized(self, w, g):
        return w * self.K_w, g * self.K_g


def _check(params: ModelParams) -> None:
    for name in ("r_w", "r_g"):
        v = getattr(params, name)
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise NonPositiveRate(f"{name} must be a positive number, got {v!r}")
    for name in ("M_w", "M_g"):
        v = getattr(params, name)
        if not (isinstance(v, (int, float)) and 0.0 < v < 1.0):
            raise LossFractionOutOfRange(f"{name} must lie in (0,1), got {v!r}")
    if params.K_w <= 0 or params.K_g <= 0:
        raise ParameterError("carrying capacities must be positive")
    spec = params.intensity
    if spec.family not in ("power", "custom", "none"):
        raise ParameterError(f"unknown intensity family {spec.family!r}")
    if spec.family == "power" and not (spec.c > 0 and spec.p >= 1):
        raise IntensityViolatesAssumptions(
            f"power intensity needs c > 0 and p >= 1, got c={spec.c}, p={spec.p}"
        )
    sup = params.lambda_sup
    if not (math.isfinite(sup) and sup >= 0):
        raise IntensityViolatesAssumptions(f"lambda_sup must be finite, got {sup}")
    if spec.family == "none":
        return

    axis = np.linspace(0.0, 1.0, VALIDATION_POINTS)
    W, G = np.meshgrid(axis, axis, indexing="xy")
    try:
        lam = np.asarray(spec(W, G), dtype=float)
        if lam.shape != W.shape:
            raise ValueError
    except Exception:
        lam = np.vectorize(lambda a, b: float(spec(a, b)))(W, G)
    if not np.all(np.isfinite(lam)):
        raise IntensityViolatesAssumptions("intensity is not finite on [0,1]^2")
    if np.any(lam[0, :] != 0.0):
        raise IntensityViolatesAssumptions("intensity must vanish when g = 0")
    if np.any(lam[1:, :] <= 0.0):
        raise IntensityViolatesAssumptions("intensity must be positive when g > 0")
    if np.any(lam > sup):
        raise IntensityViolatesAssumptions(
            f"intensity exceeds declared lambda_sup={sup} (max sampled {lam.max()})"
        )


def figure_params(**overrides) -> ModelParams:
    """Parameters used for the savanna sample-path figures (lambda = g)."""
    kw = dict(r_w=0.25, r_g=0.5, M_w=0.4, M_g=0.1, intensity=IntensitySpec.power())
    kw.update(overrides)
    return ModelParams(**kw)


_FLOAT_KEYS = ("r_w", "r_g", "M_w", "M_g", "K_w", "K_g")


def validate_params(raw: Mapping) -> ModelParams:
    """Build validated ``ModelParams`` from a flat record.

    Accepted keys are ``r_w, r_g, M_w, M_g`` (required), ``K_w, K_g`` and
    ``lambda.family, lambda.c, lambda.p, lambda.sup``. Values may be strings,
    as read from a parameter file. An ``intensity`` entry holding an
    ``IntensitySpec`` takes precedence over the ``lambda.*`` keys.
    """
    kw = {}
    for key in _FLOAT_KEYS:
        if key in raw:
            try:
                kw[key] = float(raw[key])
            except (TypeError, ValueError):
                raise ParameterError(f"{key} is not numeric: {raw[key]!r}") from None
        elif not key.startswith("K_"):
            raise ParameterError(f"missing parameter {key}")

    if isinstance(raw.get("intensity"), IntensitySpec):
        spec = raw["intensity"]
    else:
        family = str(raw.get("lambda.family", "power")).strip()
        if family == "power":
            spec = IntensitySpec.power(
                float(raw.get("lambda.c", 1.0)), float(raw.get("lambda.p", 1.0))
            )
        elif family == "none":
            spec = IntensitySpec.none()
        elif family == "constant":
            # accepted only so that it can be rejected with a precise error
            c = float(raw.get("lambda.c", 1.0))
            spec = IntensitySpec.custom(lambda w, g: c + 0.0 * g, sup=c)
        else:
            raise ParameterError(f"unknown lambda.family {family!r}")
    sup = raw.get("lambda.sup", raw.get("lambda_sup"))
    if sup is not None:
        kw["lambda_sup"] = float(sup)
    return ModelParams(intensity=spec, **kw)


def drift(params: ModelParams, x) -> tuple[float, float]:
    w, g = x[0], x[1]
    return params.r_w * w * (1.0 - w), params.r_g * g * (1.0 - g - w)


def drift_array(params: ModelParams, w, g):
    w = np.asarray(w, dtype=float)
    g = np.asarray(g, dtype=float)
    return params.r_w * w * (1.0 - w), params.r_g * g * (1.0 - g - w)


def intensity(params: ModelParams, x) -> float:
    return float(params.intensity(x[0], x[1]))


def jump(params: ModelParams, x) -> State:
    return State((1.0 - params.M_w) * x[0], (1.0 - params.M_g) * x[1])


def jump_inverse(params: ModelParams, x) -> Optional[State]:
    """Preimage of ``x`` under the fire map, or ``None`` if it lies off the square."""
    w = x[0] / (1.0 - params.M_w)
    g = x[1] / (1.0 - params.M_g)
    if w > 1.0 + CLAMP_TOL or g > 1.0 + CLAMP_TOL:
        return None
    return State(min(w, 1.0), min(g, 1.0))
