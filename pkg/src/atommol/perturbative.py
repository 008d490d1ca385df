"""Third-order perturbative operator solution and its closed-form witnesses.

The Heisenberg operators are expanded to third order in the coupling as

    a(t) = f1 a + f2 a^+ b + f3 a^+ a^2 + f4 a b^+ b + f5 a^+ b
           + f6 a^+ b^+ b^2 + f7 a^+2 a b + f8 a^3 b^+
    b(t) = g1 b + g2 a^2 + g3 b + g4 a^+ a b + g5 a^2
           + g6 a^+2 b^2 + g7 a^2 b^+ b + g8 a^+ a^3

with all operators on the right taken at t = 0.  Every witness below is the
published closed form for the initial product coherent state |alpha, beta>,
kept term by term without algebraic simplification.  All functions broadcast
over an array of physical times ``t``.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from math import comb

import numpy as np

from .model import SystemParams, ValidationError, WitnessKind

IMAG_RESIDUE_LIMIT = 1e-12


class NotDerivedError(ValueError):
    """The requested witness order has no closed form; use the exact backend."""


@dataclass(frozen=True)
class CoefficientSet:
    f1: complex
    f2: complex
    f3: complex
    f4: complex
    f5: complex
    f6: complex
    f7: complex
    f8: complex
    g1: complex
    g2: complex
    g3: complex
    g4: complex
    g5: complex
    g6: complex
    g7: complex
    g8: complex
    at_time: float

    def as_array(self) -> np.ndarray:
        """Shape (16, ...) array in the order f1..f8, g1..g8."""
        return np.array([np.broadcast_to(getattr(self, f.name), np.shape(self.at_time))
                         for f in fields(self) if f.name != "at_time"], dtype=complex)

    def scaled(self, name: str, factor: complex) -> "CoefficientSet":
        """Copy with one coefficient multiplied by ``factor`` (fault injection)."""
        if name not in COEFFICIENT_NAMES:
            raise KeyError(name)
        return replace(self, **{name: getattr(self, name) * factor})


COEFFICIENT_NAMES = tuple(f"f{i}" for i in range(1, 9)) + tuple(f"g{i}" for i in range(1, 9))


def coefficients_raw(omega: float, delta: float, t) -> CoefficientSet:
    if delta == 0:
        raise ValidationError("closed-form coefficients are singular at delta = 0")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValidationError("time must be >= 0")
    x = delta * t
    r = omega / delta
    s = np.sin(x / 2)
    f1 = np.exp(-0.5j * x)
    f2 = -2j * r * s
    f3 = 1j * r**2 * (s - x / 2 * f1)
    f4 = -2 * f3
    f5 = -1j * r**3 * (x * np.cos(x / 2) - 2 * s)
    f6 = -2 * f5
    f7 = 3 * f5
    f8 = -1j * r**3 * f1 * (x - np.sin(x))
    g1 = np.ones_like(f1)
    g2 = f1 * f2 / 2
    g3 = f1 * np.conj(f3)
    g4 = 2 * g3
    g5 = f1 * f5 / 2
    g7 = -4 * g5
    g8 = 2 * g5
    g6 = f1 * np.conj(f8)
    return CoefficientSet(f1, f2, f3, f4, f5, f6, f7, f8,
                          g1, g2, g3, g4, g5, g6, g7, g8, at_time=t)


def coefficients(params: SystemParams, t) -> CoefficientSet:
    """Coefficient set at physical time(s) ``t``."""
    return coefficients_raw(params.omega, params.delta, t)


def _cc(z):
    return z + np.conj(z)


def _real(z):
    z = np.asarray(z, dtype=complex)
    scale = np.maximum(1.0, np.abs(z.real))
    if np.any(np.abs(z.imag) > IMAG_RESIDUE_LIMIT * scale):
        raise ArithmeticError("closed form produced a non-real witness value")
    out = z.real
    return float(out) if out.ndim == 0 else out


def _pw(coef, base, exponent):
    # zero-coefficient terms may carry negative exponents of |alpha|^2
    if np.all(np.asarray(coef) == 0):
        return 0.0
    return coef * base**exponent


def _prep(params, t, coeffs):
    c = coefficients(params, t) if coeffs is None else coeffs
    al, be = params.alpha, params.beta
    return c, al, be, abs(al) ** 2, abs(be) ** 2


# --- quadrature variances --------------------------------------------------


def _sign(quadrature):
    if quadrature not in ("X", "Y"):
        raise ValueError(f"quadrature must be 'X' or 'Y', got {quadrature!r}")
    return 1 if quadrature == "X" else -1


def variance_quadrature(params: SystemParams, t, mode: str, quadrature: str, coeffs=None):
    """Closed-form quadrature variance; squeezing when below 1/4."""
    sg = _sign(quadrature)
    c, al, be, A, B = _prep(params, t, coeffs)
    cj = np.conj
    if mode == "a":
        base = 1 + 2 * abs(c.f2) ** 2 * B + _cc(2 * cj(c.f2) * c.f3 * al**2 * cj(be))
        pm = _cc(c.f1 * c.f3 * al**2
                 + (c.f1 * c.f2 + c.f1 * c.f5) * be
                 + 6 * c.f1 * c.f5 * A * be
                 + (c.f1 * c.f6 + c.f2 * c.f4) * B * be)
        return _real(0.25 * (base + sg * pm))
    if mode == "b":
        pm = _cc((c.g7 + 2 * c.g2 * c.g4) * al**2 * be)
        return _real(0.25 * (1 + sg * pm))
    if mode == "ab":
        base = (1 + abs(c.f2) ** 2 * B
                + _cc(cj(c.f2) * c.f3 * al**2 * cj(be) + c.f2 * cj(c.g4) * B * cj(al)))
        pm = 0.5 * _cc(c.f1 * c.f3 * al**2
                       + (c.f1 * c.f2 + c.f1 * c.f5) * be
                       + 2 * c.f1 * c.g4 * al * be
                       + 4 * c.f1 * c.g5 * al**3
                       + (c.f1 * c.f6 + c.f2 * c.f4) * B * be
                       + (c.g7 + 2 * c.g2 * c.g4) * al**2 * be
                       - 4 * c.f8 * cj(al) * be**2
                       + 6 * c.f1 * c.f5 * A * be)
        return _real(0.25 * (base + sg * pm))
    raise ValueError(f"mode must be 'a', 'b' or 'ab', got {mode!r}")


# --- amplitude-squared squeezing --------------------------------------------


def amplitude_squared(params: SystemParams, t, mode: str, index: int, coeffs=None,
                      corrected: bool = False):
    """Hillery amplitude-squared witness A_{index,mode}; squeezing when negative.

    The printed mode-a form carries a spurious ``-f2* f3 alpha^2 beta*`` term;
    ``corrected=True`` drops it, which reproduces the third-order expansion.
    """
    if index not in (1, 2):
        raise ValueError(f"index must be 1 or 2, got {index!r}")
    sg = 1 if index == 1 else -1
    c, al, be, A, B = _prep(params, t, coeffs)
    cj = np.conj
    f1, f2, f3, f4, f5, f8 = c.f1, c.f2, c.f3, c.f4, c.f5, c.f8
    if mode == "a":
        base = (2 * abs(f2) ** 2 * A * B
                + _cc(2 * (f1 * cj(f5) + cj(f1) * f8) * A * al**2 * cj(be)
                      + 2 * f1 * cj(f2) * abs(f2) ** 2 * al**2 * cj(be) * B
                      - (0 if corrected else cj(f2) * f3 * al**2 * cj(be))))
        pm = _cc(f1**3 * f3 * al**4
                 + f1 * f2**3 * cj(al) ** 2 * be**3
                 + 0.5 * f1**2 * f2**2 * (1 + 4 * A) * be**2
                 + f1**2 * (f1 * f2 + 7 * f1 * f5 + f2 * f3) * al**2 * be
                 + 2 * f1**2 * (2 * f2 * f3 + 3 * f1 * f5) * A * al**2 * be
                 + f1**2 * (3 * f2 * f4 - 2 * f1 * f5) * al**2 * B * be)
        return _real(base + sg * pm)
    if mode == "b":
        return _real(sg * _cc((c.g7 + 2 * c.g2 * c.g4) * al**2 * be**3))
    raise ValueError(f"mode must be 'a' or 'b', got {mode!r}")


# --- antibunching ------------------------------------------------------------


def antibunching_D(params: SystemParams, t, mode: str, coeffs=None, corrected: bool = False):
    """Sub-Poissonian parameter D for mode a, b or the pair ab; antibunching when negative.

    ``corrected=True`` restores the ``|f2|^2 f2* f1 |beta|^2 alpha^2 beta*`` term
    missing from the printed ab form.
    """
    c, al, be, A, B = _prep(params, t, coeffs)
    cj = np.conj
    f1, f2, f3, f4, f5, f6 = c.f1, c.f2, c.f3, c.f4, c.f5, c.f6
    w = al**2 * cj(be)
    if mode == "a":
        return _real(
            abs(f2) ** 2 * (B + 6 * A * B - 0.5 * A**2)
            + _cc((cj(f2) * f1 + cj(f5) * f1 + cj(f2) * f3) * w
                  + (cj(f6) * f1 + cj(f2) * f4 + 4 * abs(f2) ** 2 * cj(f2) * f1) * B * w
                  + 6 * (cj(f5) * f1 + cj(f2) * f3) * A * w))
    if mode == "b":
        return _real(2 * _cc(f1**2 * c.g6 * B * w))
    if mode == "ab":
        return _real(
            -abs(f2) ** 2 * A * B
            - _cc(2 * f1**2 * c.g6 * B * w + (cj(f5) * f1 + cj(f2) * f3) * A * w
                  + (abs(f2) ** 2 * cj(f2) * f1 * B * w if corrected else 0)))
    raise ValueError(f"mode must be 'a', 'b' or 'ab', got {mode!r}")


def hoa(params: SystemParams, t, mode: str, n: int, coeffs=None, corrected: bool = False):
    """Factorial-moment excess <N^(n)> - <N>^n; (n-1)-th order antibunching when negative.

    ``corrected=True`` flips the sign of the ``6 nC3 f1* f5`` term of mode a,
    which is what the third-order expansion gives for n >= 3.
    """
    n = int(n)
    if n < 2:
        raise ValidationError(f"higher-order antibunching needs n >= 2, got {n}")
    c, al, be, A, B = _prep(params, t, coeffs)
    cj = np.conj
    f1, f2, f3, f5, f6 = c.f1, c.f2, c.f3, c.f5, c.f6
    if mode == "b":
        return _real(_cc(n * (n - 1) * f1**2 * c.g6 * B ** (n - 1) * al**2 * cj(be)))
    if mode != "a":
        raise ValueError(f"mode must be 'a' or 'b', got {mode!r}")

    C = lambda k: comb(n, k)  # noqa: E731
    q2 = abs(f2) ** 2
    u = cj(al) ** 2 * be  # recurring phase factor alpha*^2 beta

    head = q2 * (_pw(C(2) ** 2, A, n - 2) * B
                 + _pw(n**3 - n, A, n - 1) * B
                 - _pw(0.5 * C(2), A, n))
    z = _pw((n**3 - 3 * n**2 + 2 * n) * cj(f1) ** 2 * f2 * f3
            + 3 * (n**2 - n) * cj(f1) * f5
            + (n**3 - n) * cj(f3) * f2, A, n - 1) * u
    z = z + _pw(C(2) * cj(f1) * f2
                + 0.25 * (n**4 - 6 * n**3 + 11 * n**2 - 6 * n) * cj(f1) ** 2 * f2 * f3
                + (C(2) + (6 if corrected else -6) * C(3)) * cj(f1) * f5
                + C(2) ** 2 * cj(f3) * f2, A, n - 2) * u
    z = z + _pw(3 * C(3) * cj(f1) ** 2 * f2**2, A, n - 3) * cj(al) ** 4 * be**2
    z = z + _pw(3 * C(4) * cj(f1) ** 2 * f2**2, A, n - 4) * cj(al) ** 4 * be**2
    z = z + _pw(6 * C(4) * cj(f1) ** 3 * f2**3, A, n - 4) * cj(al) ** 6 * be**3
    z = z + _pw(15 * C(5) * cj(f1) ** 3 * f2**3, A, n - 5) * cj(al) ** 6 * be**3
    z = z + _pw(15 * C(6) * cj(f1) ** 3 * f2**3, A, n - 6) * cj(al) ** 6 * be**3
    z = z + _pw(C(2) * cj(f1) * f6
                - n * (n - 1) ** 2 * cj(f1) ** 2 * f2 * f3
                + 0.5 * C(2) * (3 * n**2 - n - 4) * q2 * cj(f1) * f2
                - n**2 * (n - 1) * cj(f3) * f2, A, n - 2) * B * u
    z = z + _pw(0.75 * C(3) * n * (3 * n - 1) * q2 * cj(f1) * f2, A, n - 3) * B * u
    z = z + _pw(3 * C(2) * C(4) * q2 * cj(f1) * f2, A, n - 4) * B * u
    return _real(head + _cc(z))


# --- entanglement ------------------------------------------------------------


def entanglement(params: SystemParams, t, kind: str, coeffs=None):
    """HZ1, HZ2 (entangled when negative) or the Duan parameter d_ab."""
    c, al, be, A, B = _prep(params, t, coeffs)
    cj = np.conj
    f1, f2, f3, f5 = c.f1, c.f2, c.f3, c.f5
    w = al**2 * cj(be)
    if kind == "HZ1":
        return _real(
            abs(f2) ** 2 * (B**2 - A * B)
            + _cc((3 * cj(f2) * cj(f3) * f1**2 + 4 * cj(f2) * f3 - c.g7) * B * w
                  - (cj(f5) * f1 + cj(f2) * f3) * A * w))
    if kind == "HZ2":
        return _real(
            abs(f2) ** 2 * (B**2 + A * B)
            + _cc((2 * cj(f5) * f1 - cj(f2) * cj(f3) * f1**2) * B * w
                  - (c.g8 + cj(c.g4) * c.g2) * A * w))
    if kind == "Duan":
        return _real(2 * (abs(f2) ** 2 * B
                          + _cc(cj(f2) * f3 * w + f2 * cj(c.g4) * B * cj(al))))
    raise ValueError(f"kind must be HZ1, HZ2 or Duan, got {kind!r}")


def entanglement_higher(params: SystemParams, t, kind: str, n: int, m: int, coeffs=None,
                        corrected: bool = False):
    """Higher-order Hillery-Zubairy witnesses in the orders printed in closed form.

    HZ1Higher exists only for (n, m) = (1, 2); HZ2Higher for any n, m >= 1.
    For HZ1Higher ``corrected=True`` replaces the printed second-order
    ``-2 |alpha|^4 |beta|^2`` by ``-2 |alpha|^2 |beta|^4``.
    """
    n, m = int(n), int(m)
    c, al, be, A, B = _prep(params, t, coeffs)
    cj = np.conj
    f1, f2, f3, f5, f8 = c.f1, c.f2, c.f3, c.f5, c.f8
    q2 = abs(f2) ** 2
    w = al**2 * cj(be)
    if kind == "HZ1Higher":
        if (n, m) != (1, 2):
            raise NotDerivedError(
                f"HZ1Higher({n},{m}) is not derived in closed form; only (1,2) is. "
                "Use the exact backend for general orders.")
        return _real(
            q2 * (B**3 - 2 * (A * B**2 if corrected else A**2 * B))
            + _cc((cj(f2) * f3 + 6 * q2 * c.g2 - 2 * c.g7) * B**2 * w
                  - (2 * cj(f2) * f3 + 2 * q2 * c.g2 + c.g7) * A * B * w))
    if kind != "HZ2Higher":
        raise ValueError(f"kind must be HZ1Higher or HZ2Higher, got {kind!r}")
    if n < 1 or m < 1:
        raise ValidationError(f"HZ2Higher needs n, m >= 1, got ({n}, {m})")
    u = cj(al) ** 2 * be
    head = q2 * (m * n * A**n * B**m + _pw(n**2, A, n - 1) * B ** (m + 1))
    z = (m * n * (m - 1) * cj(f1) ** 2 * f2 * f3 + m * n * cj(f1) * f5
         + m**2 * n * cj(f3) * f2) * A**n * B ** (m - 1) * u
    z = z + _pw(2 * m * n * cj(f1) * f5 + n**2 * (1 - 2 * m) * cj(f3) * f2
                - 0.5 * m * n**2 * q2 * cj(f1) * f2
                - 2 * m * n**2 * cj(f1) ** 2 * f2 * f3, A, n - 1) * B**m * u
    z = z - _pw(n * (n - 1) * (m * cj(f8) * f1 + (n - 2) * m * cj(f3) * f2
                               + m * n * cj(f1) ** 2 * f2 * f3), A, n - 2) * B**m * u
    if n > 1:  # the prefactor n^2 (n-1) kills this group at n = 1
        z = z + n**2 * (n - 1) * q2 * cj(f1) * f2 * (
            A ** (n - 2) * B ** (m + 1) * u
            + _pw(0.5 * (n - 2), A, n - 3) * B ** (m + 1) * u)
    return _real(head + _cc(z))


# --- dispatch ----------------------------------------------------------------


# witnesses whose printed form departs from the third-order expansion
CORRECTABLE = ("AmpSq1a", "AmpSq2a", "Dab", "HOAa", "HZ1Higher")


def evaluate(kind: WitnessKind, params: SystemParams, t, coeffs=None, corrected: bool = False):
    """Closed-form value of ``kind`` at physical time(s) ``t``.

    By default every form is evaluated exactly as printed; ``corrected=True``
    applies the known fixes listed in ``CORRECTABLE`` and changes nothing else.
    """
    tag = kind.tag
    if tag.startswith("Var"):
        return variance_quadrature(params, t, tag[4:], tag[3], coeffs)
    if tag.startswith("AmpSq"):
        return amplitude_squared(params, t, tag[6], int(tag[5]), coeffs, corrected)
    if tag in ("Da", "Db", "Dab"):
        return antibunching_D(params, t, tag[1:], coeffs, corrected)
    if tag in ("HOAa", "HOAb"):
        return hoa(params, t, tag[-1], kind.n, coeffs, corrected)
    if tag in ("HZ1", "HZ2", "Duan"):
        return entanglement(params, t, tag, coeffs)
    if tag in ("HZ1Higher", "HZ2Higher"):
        return entanglement_higher(params, t, tag, kind.n, kind.m, coeffs, corrected)
    raise NotDerivedError(f"{kind.label} has no closed form; it is served by the exact backend only")
