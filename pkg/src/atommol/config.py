"""Experiment configuration files.

Grammar (one item per line, ``#`` starts a comment line)::

    [section]
    key = value

Sections and keys::

    [experiment]  name, preset
    [params]      omega, delta, alpha, beta        (alpha/beta accept 2, -2, 1+0.5j)
    [grid]        omega_t_max, samples, include_zero   or   points = 0.1, 0.2, ...
    [witnesses]   kinds = VarXa, HOAb(3), HZ2Higher(1,2), LeeR(2,1,a)
    [numerics]    backend, tolerance, cutoff_a, cutoff_b, method, closed_forms
    [compare]     ladder, min_slope, residual_tolerance, corrupt   (corrupt = f2*1.5)
    [output]      dir

With ``preset`` set, the preset supplies the physical setup and the witnesses; any
explicit key overrides it.  Unknown or duplicate keys are rejected with the
offending line number, as are malformed values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .model import (BACKENDS, PRESETS, SystemParams, TimeGrid, ValidationError, WitnessKind,
                    parse_kinds)
from .perturbative import COEFFICIENT_NAMES
from .fock import PROPAGATION_METHODS

CLOSED_FORMS = ("printed", "corrected")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        self.line = line
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class GridSpec:
    """Either a uniform grid or an explicit list of rescaled times."""

    omega_t_max: float | None = 0.5
    samples: int | None = 200
    include_zero: bool = False
    points: tuple[float, ...] | None = None

    def build(self) -> TimeGrid:
        if self.points is not None:
            return TimeGrid(self.points)
        return TimeGrid.uniform(self.omega_t_max, self.samples, self.include_zero)


@dataclass(frozen=True)
class ExperimentConfig:
    params: SystemParams
    kinds: tuple[WitnessKind, ...]
    grid: GridSpec = field(default_factory=GridSpec)
    name: str = "experiment"
    preset: str | None = None
    backend: str = "perturbative"
    tolerance: float = 1e-10
    cutoff_a: int | None = None
    cutoff_b: int | None = None
    method: str = "spectral"
    closed_forms: str = "printed"
    ladder: tuple[float, ...] | None = None
    min_slope: float = 3.0
    residual_tolerance: float | None = None
    corrupt: tuple[str, complex] | None = None
    output_dir: str = "out"

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValidationError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.method not in PROPAGATION_METHODS:
            raise ValidationError(f"method must be one of {PROPAGATION_METHODS}, got {self.method!r}")
        if self.closed_forms not in CLOSED_FORMS:
            raise ValidationError(f"closed_forms must be one of {CLOSED_FORMS}")
        if self.corrupt is not None and self.corrupt[0] not in COEFFICIENT_NAMES:
            raise ValidationError(f"cannot corrupt unknown coefficient {self.corrupt[0]!r}")
        if not self.tolerance > 0:
            raise ValidationError("tolerance must be > 0")

    @classmethod
    def from_preset(cls, preset: str, /, **overrides) -> "ExperimentConfig":
        if preset not in PRESETS:
            raise ValidationError(f"unknown preset {preset!r}; known: {', '.join(PRESETS)}")
        p = PRESETS[preset]
        fields_ = dict(params=p.params, kinds=p.kinds, grid=GridSpec(p.omega_t_max, p.samples),
                       name=preset, preset=preset)
        fields_.update(overrides)
        return cls(**fields_)

    @property
    def time_grid(self) -> TimeGrid:
        return self.grid.build()

    @property
    def corrected(self) -> bool:
        return self.closed_forms == "corrected"

    def to_text(self) -> str:
        return dump(self)


# --- value codecs ----------------------------------------------------------------


def _fmt_complex(z: complex) -> str:
    return repr(z.real) if z.imag == 0 else repr(z).strip("()")


def _complex(s: str) -> complex:
    return complex(s.replace(" ", ""))


def _bool(s: str) -> bool:
    low = s.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"expected true/false, got {s!r}")


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(x) for x in s.split(",") if x.strip())


def _cutoff(s: str) -> int | None:
    return None if s.lower() == "auto" else int(s)


def _optional_float(s: str) -> float | None:
    return None if s.lower() == "none" else float(s)


def _corrupt(s: str) -> tuple[str, complex] | None:
    if s.lower() == "none":
        return None
    name, sep, factor = s.partition("*")
    if not sep:
        raise ValueError(f"expected <coefficient>*<factor>, got {s!r}")
    return name.strip(), _complex(factor.strip())


# section -> key -> (attribute path, parser)
SCHEMA = {
    "experiment": {"name": str, "preset": str},
    "params": {"omega": float, "delta": float, "alpha": _complex, "beta": _complex},
    "grid": {"omega_t_max": float, "samples": int, "include_zero": _bool, "points": _floats},
    "witnesses": {"kinds": parse_kinds},
    "numerics": {"backend": str, "tolerance": float, "cutoff_a": _cutoff, "cutoff_b": _cutoff,
                 "method": str, "closed_forms": str},
    "compare": {"ladder": _floats, "min_slope": float, "residual_tolerance": _optional_float,
                "corrupt": _corrupt},
    "output": {"dir": str},
}


def parse(text: str, source: str = "<config>") -> ExperimentConfig:
    raw: dict[tuple[str, str], tuple[object, int]] = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigError(f"malformed section header {stripped!r}", lineno, source)
            section = stripped[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", lineno, source)
            continue
        key, sep, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"expected 'key = value', got {stripped!r}", lineno, source)
        if section is None:
            raise ConfigError(f"key {key!r} outside any section", lineno, source)
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno, source)
        if (section, key) in raw:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", lineno, source)
        try:
            raw[(section, key)] = (SCHEMA[section][key](value), lineno)
        except (ValueError, ValidationError) as exc:
            raise ConfigError(f"bad value for {key}: {exc}", lineno, source) from None
    return _assemble(raw, source)


def _assemble(raw, source) -> ExperimentConfig:
    get = lambda s, k, default=None: raw[(s, k)][0] if (s, k) in raw else default  # noqa: E731
    preset = get("experiment", "preset")
    if preset is not None and preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}", raw[("experiment", "preset")][1], source)
    base = PRESETS.get(preset)

    try:
        p0 = base.params if base else None
        fields_ = {}
        for key in ("omega", "delta", "alpha", "beta"):
            v = get("params", key, getattr(p0, key) if p0 else None)
            if v is None:
                raise ConfigError(f"[params] {key} is required without a preset", None, source)
            fields_[key] = v
        params = SystemParams(**fields_)

        points = get("grid", "points")
        uniform_keys = [k for k in ("omega_t_max", "samples", "include_zero") if ("grid", k) in raw]
        if points is not None and uniform_keys:
            raise ConfigError("[grid] points cannot be combined with " + ", ".join(uniform_keys),
                              raw[("grid", "points")][1], source)
        if points is not None:
            grid = GridSpec(None, None, False, points)
        else:
            grid = GridSpec(get("grid", "omega_t_max", base.omega_t_max if base else 0.5),
                            get("grid", "samples", base.samples if base else 200),
                            get("grid", "include_zero", False))
        grid.build()

        kinds = get("witnesses", "kinds", list(base.kinds) if base else None)
        if kinds is None:
            raise ConfigError("[witnesses] kinds is required without a preset", None, source)

        return ExperimentConfig(
            params=params, kinds=tuple(kinds), grid=grid,
            name=get("experiment", "name", preset or "experiment"), preset=preset,
            backend=get("numerics", "backend", "perturbative"),
            tolerance=get("numerics", "tolerance", 1e-10),
            cutoff_a=get("numerics", "cutoff_a"), cutoff_b=get("numerics", "cutoff_b"),
            method=get("numerics", "method", "spectral"),
            closed_forms=get("numerics", "closed_forms", "printed"),
            ladder=get("compare", "ladder"), min_slope=get("compare", "min_slope", 3.0),
            residual_tolerance=get("compare", "residual_tolerance"),
            corrupt=get("compare", "corrupt"), output_dir=get("output", "dir", "out"))
    except ValidationError as exc:
        raise ConfigError(str(exc), None, source) from None


def load(path) -> ExperimentConfig:
    path = Path(path)
    return parse(path.read_text(encoding="utf-8"), str(path))


def dump(cfg: ExperimentConfig) -> str:
    """Fully expanded text form; ``parse(dump(cfg)) == cfg``."""
    opt = lambda v: "none" if v is None else repr(v)  # noqa: E731
    lines = ["[experiment]", f"name = {cfg.name}"]
    if cfg.preset is not None:
        lines.append(f"preset = {cfg.preset}")
    p = cfg.params
    lines += ["", "[params]", f"omega = {p.omega!r}", f"delta = {p.delta!r}",
              f"alpha = {_fmt_complex(p.alpha)}", f"beta = {_fmt_complex(p.beta)}", "", "[grid]"]
    g = cfg.grid
    if g.points is not None:
        lines.append("points = " + ", ".join(repr(x) for x in g.points))
    else:
        lines += [f"omega_t_max = {g.omega_t_max!r}", f"samples = {g.samples}",
                  f"include_zero = {str(g.include_zero).lower()}"]
    lines += ["", "[witnesses]", "kinds = " + ", ".join(k.label for k in cfg.kinds),
              "", "[numerics]", f"backend = {cfg.backend}", f"tolerance = {cfg.tolerance!r}",
              f"cutoff_a = {'auto' if cfg.cutoff_a is None else cfg.cutoff_a}",
              f"cutoff_b = {'auto' if cfg.cutoff_b is None else cfg.cutoff_b}",
              f"method = {cfg.method}", f"closed_forms = {cfg.closed_forms}", "", "[compare]"]
    if cfg.ladder is not None:
        lines.append("ladder = " + ", ".join(repr(x) for x in cfg.ladder))
    lines += [f"min_slope = {cfg.min_slope!r}", f"residual_tolerance = {opt(cfg.residual_tolerance)}"]
    if cfg.corrupt is not None:
        lines.append(f"corrupt = {cfg.corrupt[0]}*{_fmt_complex(cfg.corrupt[1])}")
    lines += ["", "[output]", f"dir = {cfg.output_dir}"]
    return "\n".join(lines) + "\n"
