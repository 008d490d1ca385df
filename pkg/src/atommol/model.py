"""Physical parameters, time grids and witness identifiers shared by both backends.

Units: hbar = 1, so ``omega`` and ``delta`` are angular frequencies and every
time axis is carried as the dimensionless rescaled time ``omega * t``.
"""

from __future__ import annotations

import cmath
import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

BACKENDS = ("perturbative", "exact", "both")

# the closed-form solution is only trusted below this rescaled time
PERTURBATIVE_VALIDITY = 1.0


class ValidationError(ValueError):
    """Raised for inputs that no backend can evaluate."""


@dataclass(frozen=True)
class SystemParams:
    """Coupling ``omega``, detuning ``delta`` and initial coherent amplitudes."""

    omega: float
    delta: float
    alpha: complex
    beta: complex

    def __post_init__(self):
        object.__setattr__(self, "omega", float(self.omega))
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "beta", complex(self.beta))
        problems = param_violations(self)
        if problems:
            raise ValidationError("; ".join(problems))

    def rescale(self, omega_t):
        return rescale(self, omega_t)


def param_violations(params) -> list[str]:
    out = []
    if not math.isfinite(params.omega) or params.omega <= 0:
        out.append(f"omega must be finite and > 0, got {params.omega!r}")
    if not math.isfinite(params.delta) or params.delta == 0:
        out.append(f"delta must be finite and nonzero, got {params.delta!r}")
    for name in ("alpha", "beta"):
        z = getattr(params, name)
        if not (cmath.isfinite(z)):
            out.append(f"{name} must be a finite complex number, got {z!r}")
    return out


def grid_violations(samples: Sequence[float]) -> list[str]:
    s = np.asarray(samples, dtype=float)
    out = []
    if s.ndim != 1 or s.size == 0:
        return ["time grid must be a non-empty 1-d sequence"]
    if not np.all(np.isfinite(s)):
        out.append("time grid contains non-finite samples")
    if np.any(s < 0):
        out.append("time grid contains negative rescaled times")
    if s.size > 1 and np.any(np.diff(s) <= 0):
        out.append("time grid is not strictly increasing")
    return out


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing rescaled times ``omega * t >= 0``."""

    samples: tuple[float, ...]

    def __post_init__(self):
        samples = tuple(float(x) for x in np.atleast_1d(self.samples))
        problems = grid_violations(samples)
        if problems:
            raise ValidationError("; ".join(problems))
        object.__setattr__(self, "samples", samples)

    @classmethod
    def uniform(cls, omega_t_max: float, samples: int, include_zero: bool = False) -> "TimeGrid":
        """``samples`` evenly spaced points on (0, max], or [0, max] with ``include_zero``."""
        if samples < 1:
            raise ValidationError("a grid needs at least one sample")
        if include_zero:
            pts = np.linspace(0.0, omega_t_max, samples)
        else:
            pts = omega_t_max * np.arange(1, samples + 1) / samples
        return cls(tuple(pts))

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @property
    def max(self) -> float:
        return self.samples[-1]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.samples)

    def physical_times(self, params: SystemParams) -> np.ndarray:
        return self.as_array() / params.omega


def rescale(params: SystemParams, omega_t):
    """Physical time ``t = omega_t / omega``; accepts scalars or arrays."""
    if np.any(np.asarray(omega_t) < 0):
        raise ValidationError("rescaled time must be >= 0")
    return omega_t / params.omega


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors and not self.warnings

    @property
    def fatal(self) -> bool:
        return bool(self.errors)

    def raise_for_errors(self):
        if self.errors:
            raise ValidationError("; ".join(self.errors))


def validate(params, grid, backend: str) -> ValidationReport:
    """Check a (params, grid, backend) combination without raising.

    ``grid`` may be a :class:`TimeGrid` or a raw sequence of rescaled times so
    malformed grids can be reported instead of rejected at construction.
    """
    errors = list(param_violations(params))
    warnings = []
    samples = grid.samples if isinstance(grid, TimeGrid) else tuple(np.atleast_1d(grid))
    errors += grid_violations(samples)
    if backend not in BACKENDS:
        errors.append(f"unknown backend {backend!r}; expected one of {BACKENDS}")
    elif backend in ("perturbative", "both") and samples and max(samples) >= PERTURBATIVE_VALIDITY:
        warnings.append(
            f"grid reaches omega*t = {max(samples):g}: outside stated validity of the "
            f"third-order solution (omega*t < {PERTURBATIVE_VALIDITY:g})"
        )
    return ValidationReport(tuple(errors), tuple(warnings))


# --- witness identifiers ---------------------------------------------------

VARIANCE_TAGS = ("VarXa", "VarYa", "VarXb", "VarYb", "VarXab", "VarYab")
AMPSQ_TAGS = ("AmpSq1a", "AmpSq2a", "AmpSq1b", "AmpSq2b")
PLAIN_TAGS = VARIANCE_TAGS + AMPSQ_TAGS + ("Da", "Db", "Dab", "HZ1", "HZ2", "Duan")
ORDERED_TAGS = ("HOAa", "HOAb", "HZ1Higher", "HZ2Higher")
LEE_TAGS = ("LeeRa", "LeeRb")
ALL_TAGS = PLAIN_TAGS + ORDERED_TAGS + LEE_TAGS

SQUEEZING_THRESHOLD = 0.25

_KIND_RE = re.compile(r"^\s*([A-Za-z0-9]+)\s*(?:\(([^)]*)\))?\s*$")


@dataclass(frozen=True)
class WitnessKind:
    """One nonclassicality witness, with its order parameters.

    ``n`` is the HOA order, the ``a``-power of higher-order HZ, or Lee's ``l``;
    ``m`` is the ``b``-power of higher-order HZ or Lee's ``m``.
    """

    tag: str
    n: int | None = None
    m: int | None = None

    def __post_init__(self):
        if self.tag not in ALL_TAGS:
            raise ValidationError(f"unknown witness {self.tag!r}")
        n, m = self.n, self.m
        if self.tag in PLAIN_TAGS:
            if n is not None or m is not None:
                raise ValidationError(f"{self.tag} takes no order parameters")
        elif self.tag in ("HOAa", "HOAb"):
            if n is None or m is not None or n < 2:
                raise ValidationError(f"{self.tag} needs a single order n >= 2, got n={n}")
        elif self.tag in ("HZ1Higher", "HZ2Higher"):
            if n is None or m is None or n < 1 or m < 1:
                raise ValidationError(f"{self.tag} needs orders n >= 1, m >= 1, got ({n}, {m})")
        else:
            if n is None or m is None or not 1 <= m <= n:
                raise ValidationError(f"Lee R(l, m) needs 1 <= m <= l, got ({n}, {m})")

    @classmethod
    def parse(cls, text: str) -> "WitnessKind":
        """Parse ``VarXa``, ``HOAb(3)``, ``HZ2Higher(1,2)`` or ``LeeR(2,1,a)``."""
        match = _KIND_RE.match(text)
        if not match:
            raise ValidationError(f"cannot parse witness {text!r}")
        tag, args = match.group(1), match.group(2)
        parts = [p.strip() for p in args.split(",")] if args else []
        if tag == "LeeR":
            if len(parts) != 3 or parts[2] not in ("a", "b"):
                raise ValidationError(f"LeeR expects (l, m, mode), got {text!r}")
            tag = "LeeR" + parts.pop()
        try:
            orders = [int(p) for p in parts]
        except ValueError:
            raise ValidationError(f"non-integer order in {text!r}") from None
        if len(orders) > 2:
            raise ValidationError(f"too many orders in {text!r}")
        return cls(tag, *orders)

    @property
    def label(self) -> str:
        if self.tag in LEE_TAGS:
            return f"LeeR({self.n},{self.m},{self.tag[-1]})"
        orders = [str(x) for x in (self.n, self.m) if x is not None]
        return f"{self.tag}({','.join(orders)})" if orders else self.tag

    def __str__(self):
        return self.label

    @property
    def threshold(self) -> float:
        """Value below which the witness certifies nonclassicality."""
        return SQUEEZING_THRESHOLD if self.tag in VARIANCE_TAGS else 0.0

    @property
    def has_closed_form(self) -> bool:
        if self.tag in LEE_TAGS:
            return False
        if self.tag == "HZ1Higher":
            return (self.n, self.m) == (1, 2)
        return True

    @property
    def baseline(self) -> float:
        """Value on the initial coherent product state."""
        return self.threshold


def parse_kinds(items: Iterable[str] | str) -> list[WitnessKind]:
    """Split a comma list of witnesses, respecting parentheses."""
    if isinstance(items, str):
        items = _split_top_level(items)
    return [k if isinstance(k, WitnessKind) else WitnessKind.parse(k) for k in items]


def _split_top_level(text: str) -> list[str]:
    out, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            out.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    tail = "".join(cur).strip()
    if tail:
        out.append(tail)
    return [x for x in out if x]


# --- figure presets --------------------------------------------------------


@dataclass(frozen=True)
class Preset:
    name: str
    params: SystemParams
    kinds: tuple[WitnessKind, ...]
    source: str
    omega_t_max: float = 0.5
    samples: int = 200


def _preset(name, alpha, beta, kinds, source):
    return Preset(
        name=name,
        params=SystemParams(omega=1e2, delta=1e4, alpha=alpha, beta=beta),
        kinds=tuple(parse_kinds(kinds)),
        source=source,
    )


PRESETS: dict[str, Preset] = {
    p.name: p
    for p in (
        _preset("fig1", 5, 2, "VarXa, VarYa, VarXb, VarYb, VarXab, VarYab", "Fig. 1(a)-(c)"),
        _preset("fig1d", 5, -2, "VarXa, VarYa, VarXab, VarYab", "Fig. 1(d)"),
        _preset("fig2", 10, 2, "AmpSq1a, AmpSq2a, AmpSq1b, AmpSq2b", "Fig. 2"),
        _preset("fig3", 10, 2, "Da, Db, Dab", "Fig. 3(a)-(c)"),
        _preset("fig3d", 10, -2, "Da", "Fig. 3(d)"),
        _preset("fig4", 10, 2, "HZ1, HZ2, Duan", "Fig. 4"),
        _preset(
            "fig5",
            10,
            2,
            "HOAa(3), HOAa(4), HOAb(3), HOAb(4), HZ1, HZ1Higher(1,2), "
            "HZ2Higher(1,1), HZ2Higher(1,2), HZ2Higher(1,3)",
            "Figs. 5-6 (higher-order antibunching, higher-order entanglement)",
        ),
    )
}
