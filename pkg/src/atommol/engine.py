"""Sweeps over time grids, nonclassical-region extraction and cross-backend comparison."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import fock, perturbative
from .model import SystemParams, TimeGrid, ValidationError, WitnessKind, BACKENDS

CoeffHook = Callable[[perturbative.CoefficientSet], perturbative.CoefficientSet]

DEFAULT_MIN_SLOPE = 3.0
MIN_LADDER_POINTS = 4


class ExactOnlyWitnessError(ValueError):
    """The witness has no printed closed form, so there is nothing to compare."""


class DegenerateLadderError(ValueError):
    pass


@dataclass(frozen=True)
class ExactOptions:
    """Knobs for the exact backend; ``None`` cutoffs select the automatic policy."""

    cutoff_a: int | None = None
    cutoff_b: int | None = None
    tolerance: float = 1e-10
    method: str = "spectral"

    def space(self, params: SystemParams) -> fock.FockSpace:
        return fock.build_space(params, self.cutoff_a, self.cutoff_b)


@dataclass(frozen=True)
class WitnessSeries:
    kind: WitnessKind
    grid: TimeGrid
    values: tuple[float, ...]
    backend: str
    params: SystemParams

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if len(values) != len(self.grid):
            raise ValueError(f"{len(values)} values for a grid of {len(self.grid)} points")
        if not all(np.isfinite(values)):
            raise fock.NumericalError(f"non-finite {self.kind} values from the {self.backend} backend")
        object.__setattr__(self, "values", values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values)


@dataclass(frozen=True)
class NonclassicalRegion:
    kind: WitnessKind
    threshold: float
    intervals: tuple[tuple[float, float], ...]

    @property
    def total_length(self) -> float:
        return sum(b - a for a, b in self.intervals)

    def __bool__(self):
        return bool(self.intervals)


@dataclass(frozen=True)
class ComparisonReport:
    kind: WitnessKind
    params: SystemParams
    ladder: tuple[float, ...]
    perturbative: tuple[float, ...]
    exact: tuple[float, ...]
    residuals: tuple[float, ...]
    slope: float
    min_slope: float = DEFAULT_MIN_SLOPE
    tolerance: float | None = None

    @property
    def max_abs_residual(self) -> float:
        return max(self.residuals)

    def residual_at(self, omega_t: float) -> float:
        return self.residuals[self.ladder.index(omega_t)]

    @property
    def slope_ok(self) -> bool:
        return bool(self.slope >= self.min_slope)

    @property
    def residual_ok(self) -> bool:
        return self.tolerance is None or self.max_abs_residual <= self.tolerance

    @property
    def passed(self) -> bool:
        return self.slope_ok and self.residual_ok


# --- sweeps ------------------------------------------------------------------------


def perturbative_values(kind: WitnessKind, params: SystemParams, omega_t,
                        corrected: bool = False, coeff_hook: CoeffHook | None = None) -> np.ndarray:
    t = np.asarray(omega_t, dtype=float) / params.omega
    coeffs = perturbative.coefficients(params, t)
    if coeff_hook is not None:
        coeffs = coeff_hook(coeffs)
    return np.atleast_1d(perturbative.evaluate(kind, params, t, coeffs, corrected=corrected))


def exact_values(kinds: Sequence[WitnessKind], params: SystemParams, omega_t,
                 options: ExactOptions | None = None) -> np.ndarray:
    """Array of shape (len(kinds), len(omega_t)) from one propagation per grid point."""
    options = options or ExactOptions()
    states = fock.evolve(params, omega_t, options.space(params),
                         tolerance=options.tolerance, method=options.method)
    table = [fock.witnesses_exact(s, kinds) for s in states]
    return np.array(table, dtype=float).T.reshape(len(kinds), len(states))


def sweep(params: SystemParams, grid: TimeGrid, kinds: Sequence[WitnessKind],
          backend: str = "perturbative", *, exact: ExactOptions | None = None,
          corrected: bool = False, coeff_hook: CoeffHook | None = None) -> list[WitnessSeries]:
    """Evaluate every kind over ``grid``.

    With ``backend="both"`` each kind yields its perturbative series followed
    by its exact one; kinds without a closed form then yield only the exact
    series.  Asking the perturbative backend alone for such a kind raises
    :class:`perturbative.NotDerivedError`.
    """
    if backend not in BACKENDS:
        raise ValidationError(f"unknown backend {backend!r}")
    kinds = list(kinds)
    if not kinds:
        return []
    omega_t = grid.as_array()
    pert = {}
    if backend in ("perturbative", "both"):
        for k in kinds:
            if not k.has_closed_form:
                if backend == "perturbative":
                    raise perturbative.NotDerivedError(
                        f"{k} has no closed form; use the exact backend")
                continue
            pert[k] = perturbative_values(k, params, omega_t, corrected, coeff_hook)
    ex = {}
    if backend in ("exact", "both"):
        ex = dict(zip(kinds, exact_values(kinds, params, omega_t, exact)))
    out = []
    for k in kinds:
        if k in pert:
            out.append(WitnessSeries(k, grid, tuple(pert[k]), "perturbative", params))
        if k in ex:
            out.append(WitnessSeries(k, grid, tuple(ex[k]), "exact", params))
    return out


# --- regions -----------------------------------------------------------------------


def _crossing(x0, y0, x1, y1, level):
    if y1 == y0:
        return x0
    return x0 + (level - y0) * (x1 - x0) / (y1 - y0)


def regions(series: WitnessSeries) -> NonclassicalRegion:
    """Intervals of the grid span where the value is strictly below the kind's threshold."""
    thr = series.kind.threshold
    x = series.grid.as_array()
    y = series.as_array()
    below = y < thr
    intervals = []
    i, n = 0, len(y)
    while i < n:
        if not below[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and below[j + 1]:
            j += 1
        start = x[0] if i == 0 else _crossing(x[i - 1], y[i - 1], x[i], y[i], thr)
        end = x[-1] if j == n - 1 else _crossing(x[j], y[j], x[j + 1], y[j + 1], thr)
        intervals.append((float(start), float(end)))
        i = j + 1
    return NonclassicalRegion(series.kind, thr, tuple(intervals))


# --- comparison --------------------------------------------------------------------


def check_ladder(ladder: Sequence[float]) -> tuple[float, ...]:
    pts = tuple(sorted({float(x) for x in ladder}, reverse=True))
    positive = [x for x in pts if x > 0]
    if len(positive) < MIN_LADDER_POINTS:
        raise DegenerateLadderError(
            f"a convergence ladder needs at least {MIN_LADDER_POINTS} distinct rescaled times > 0, "
            f"got {list(ladder)}")
    if len(positive) != len(pts):
        raise DegenerateLadderError("ladder points must be > 0 (the residual vanishes at t = 0)")
    return pts


def log_slope(x: Sequence[float], residuals: Sequence[float]) -> float:
    r = np.asarray(residuals, dtype=float)
    if np.any(r <= 0):
        # an exactly vanishing residual means agreement to the last bit
        return float("inf")
    return float(np.polyfit(np.log(np.asarray(x, dtype=float)), np.log(r), 1)[0])


def compare_many(params: SystemParams, ladder: Sequence[float], kinds: Sequence[WitnessKind], *,
                 exact: ExactOptions | None = None, corrected: bool = False,
                 coeff_hook: CoeffHook | None = None, min_slope: float = DEFAULT_MIN_SLOPE,
                 tolerance: float | None = None) -> list[ComparisonReport]:
    """One report per kind, sharing a single set of propagated states."""
    for k in kinds:
        if not k.has_closed_form:
            raise ExactOnlyWitnessError(f"{k} is an exact-only witness; nothing to compare")
    pts = check_ladder(ladder)
    kinds = list(kinds)
    ex = exact_values(kinds, params, pts, exact)
    reports = []
    for k, e in zip(kinds, ex):
        p = perturbative_values(k, params, pts, corrected, coeff_hook)
        res = np.abs(p - e)
        reports.append(ComparisonReport(
            kind=k, params=params, ladder=pts, perturbative=tuple(map(float, p)),
            exact=tuple(map(float, e)), residuals=tuple(map(float, res)),
            slope=log_slope(pts, res), min_slope=min_slope, tolerance=tolerance))
    return reports


def compare(params: SystemParams, ladder: Sequence[float], kind: WitnessKind, **kwargs) -> ComparisonReport:
    """Residuals and log-log convergence slope of one witness over a shrinking-time ladder."""
    return compare_many(params, ladder, [kind], **kwargs)[0]
