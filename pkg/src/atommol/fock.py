"""Exact truncated-Fock backend.

The two-mode state lives on |n_a, n_b> with 0 <= n_a <= N_A, 0 <= n_b <= N_B,
flattened as ``index = n_a * (N_B + 1) + n_b``.  The Hamiltonian

    H = (delta/2) a^+ a + (omega/2) (a^+ a^+ b + a a b^+)

conserves K = n_a + 2 n_b, and within a fixed-K sector it only links
|K - 2j, j> to |K - 2j - 2, j + 1>, so every sector is a real symmetric
tridiagonal matrix.  Witnesses are Schroedinger-picture expectations of the
t = 0 operators on the evolved state, which equal the Heisenberg-picture
moments used by the closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import expm_multiply
from scipy.special import gammaln

from .model import SystemParams, ValidationError, WitnessKind

NORM_TOLERANCE = 1e-9
TAIL_BOUND = 1e-8
INITIAL_TAIL_BOUND = 1e-10
# 8 sigmas leaves ~1e-8 of a mean-4 Poisson state on the top shell; 10 clears it
CUTOFF_SIGMAS = 10
TOP_SHELL_DEPTH = 3  # occupations N-2, N-1, N count as the top shell


class NumericalError(RuntimeError):
    """Propagation failed to meet its accuracy contract."""


class CutoffError(NumericalError):
    """The truncated space is too small for the requested state or moment."""


@dataclass(frozen=True)
class FockSpace:
    cutoff_a: int
    cutoff_b: int

    def __post_init__(self):
        if self.cutoff_a < 1 or self.cutoff_b < 1:
            raise ValidationError(f"cutoffs must be >= 1, got ({self.cutoff_a}, {self.cutoff_b})")

    @property
    def shape(self) -> tuple[int, int]:
        return self.cutoff_a + 1, self.cutoff_b + 1

    @property
    def dimension(self) -> int:
        return (self.cutoff_a + 1) * (self.cutoff_b + 1)

    def index(self, n_a: int, n_b: int) -> int:
        return n_a * (self.cutoff_b + 1) + n_b

    @cached_property
    def occupations(self) -> tuple[np.ndarray, np.ndarray]:
        na, nb = np.meshgrid(np.arange(self.cutoff_a + 1), np.arange(self.cutoff_b + 1), indexing="ij")
        return na.ravel(), nb.ravel()

    @cached_property
    def a(self) -> sp.csr_matrix:
        return sp.kron(_lowering(self.cutoff_a), sp.identity(self.cutoff_b + 1), format="csr")

    @cached_property
    def b(self) -> sp.csr_matrix:
        return sp.kron(sp.identity(self.cutoff_a + 1), _lowering(self.cutoff_b), format="csr")

    @cached_property
    def sectors(self) -> list[np.ndarray]:
        """Flat indices of each conserved-charge sector, ordered by molecule number."""
        na, nb = self.occupations
        charge = na + 2 * nb
        out = []
        for k in range(int(charge.max()) + 1):
            idx = np.flatnonzero(charge == k)
            if idx.size:
                out.append(idx[np.argsort(nb[idx])])
        return out

    def top_shell_mask(self) -> np.ndarray:
        na, nb = self.occupations
        return (na >= self.cutoff_a - (TOP_SHELL_DEPTH - 1)) | (nb >= self.cutoff_b - (TOP_SHELL_DEPTH - 1))


def _lowering(cutoff: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, cutoff + 1)), 1, format="csr", dtype=float)


def auto_cutoffs(alpha: complex, beta: complex) -> tuple[int, int]:
    """Cutoffs ``CUTOFF_SIGMAS`` standard deviations above the mean occupations.

    Molecule growth is bounded by charge conservation: at most |alpha|^2/2
    extra molecules can form.
    """
    na = abs(alpha) ** 2
    nb = abs(beta) ** 2 + na / 2
    k = CUTOFF_SIGMAS
    return math.ceil(na + k * math.sqrt(na + 1)), math.ceil(nb + k * math.sqrt(nb + 1))


def build_space(params: SystemParams, cutoff_a: int | None = None, cutoff_b: int | None = None) -> FockSpace:
    """Truncated space for ``params``; ``None`` cutoffs use the automatic policy."""
    auto_a, auto_b = auto_cutoffs(params.alpha, params.beta)
    ca = auto_a if cutoff_a is None else int(cutoff_a)
    cb = auto_b if cutoff_b is None else int(cutoff_b)
    mean_a = abs(params.alpha) ** 2
    mean_b = abs(params.beta) ** 2
    if ca < mean_a or cb < mean_b:
        raise CutoffError(
            f"cutoffs ({ca}, {cb}) lie below the mean occupations ({mean_a:g}, {mean_b:g})")
    return FockSpace(ca, cb)


@dataclass(frozen=True, eq=False)
class StateVector:
    space: FockSpace
    amplitudes: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).ravel()
        if amps.size != self.space.dimension:
            raise ValueError(f"expected {self.space.dimension} amplitudes, got {amps.size}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def grid(self) -> np.ndarray:
        """Amplitudes as a (N_A + 1, N_B + 1) array indexed by occupations."""
        return self.amplitudes.reshape(self.space.shape)

    def top_shell_population(self) -> float:
        return float(np.sum(np.abs(self.amplitudes[self.space.top_shell_mask()]) ** 2))


def _coherent_column(z: complex, cutoff: int) -> np.ndarray:
    n = np.arange(cutoff + 1)
    if z == 0:
        col = np.zeros(cutoff + 1, dtype=complex)
        col[0] = 1.0
        return col
    logmag = -abs(z) ** 2 / 2 + n * math.log(abs(z)) - 0.5 * gammaln(n + 1)
    return np.exp(logmag) * np.exp(1j * n * np.angle(z))


def coherent_state(space: FockSpace, alpha: complex, beta: complex,
                   tail_bound: float = INITIAL_TAIL_BOUND) -> StateVector:
    """Product coherent state |alpha> x |beta>, renormalized once after truncation."""
    amps = np.outer(_coherent_column(alpha, space.cutoff_a), _coherent_column(beta, space.cutoff_b))
    tail = 1.0 - float(np.sum(np.abs(amps) ** 2))
    if tail > tail_bound:
        raise CutoffError(
            f"cutoff too small: truncated coherent-state tail mass {tail:.3g} exceeds {tail_bound:g}")
    amps /= np.linalg.norm(amps)
    return StateVector(space, amps.ravel(), 0.0)


class Hamiltonian:
    """Sparse Hamiltonian on a truncated space, with its charge-sector blocks."""

    def __init__(self, space: FockSpace, omega: float, delta: float):
        self.space = space
        self.omega = float(omega)
        self.delta = float(delta)
        self.blocks = [self._block(idx) for idx in space.sectors]

    @classmethod
    def from_params(cls, space: FockSpace, params: SystemParams) -> "Hamiltonian":
        return cls(space, params.omega, params.delta)

    def _block(self, idx):
        na, nb = self.space.occupations
        a_occ, b_occ = na[idx], nb[idx]
        diag = 0.5 * self.delta * a_occ.astype(float)
        # <n_a - 2, n_b + 1| a a b^+ |n_a, n_b> = sqrt(n_a (n_a - 1) (n_b + 1))
        off = 0.5 * self.omega * np.sqrt(a_occ[:-1] * (a_occ[:-1] - 1.0) * (b_occ[:-1] + 1.0))
        return idx, diag, off

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        a, b = self.space.a, self.space.b
        ad = a.T.tocsr()
        coupling = ad @ ad @ b
        H = 0.5 * self.delta * (ad @ a) + 0.5 * self.omega * (coupling + coupling.T)
        return H.tocsr()

    @cached_property
    def _eigensystems(self):
        out = []
        for idx, diag, off in self.blocks:
            if idx.size == 1:
                out.append((idx, diag, np.ones((1, 1))))
            else:
                w, v = eigh_tridiagonal(diag, off)
                out.append((idx, w, v))
        return out

    def expectation(self, state: StateVector) -> float:
        psi = state.amplitudes
        return float(np.vdot(psi, self.matrix @ psi).real)

    def charge(self, state: StateVector) -> float:
        na, nb = self.space.occupations
        return float(np.sum((na + 2 * nb) * np.abs(state.amplitudes) ** 2))


PROPAGATION_METHODS = ("spectral", "dop853", "expm")


def propagate(state: StateVector, H: Hamiltonian, t_target: float, tolerance: float = 1e-10,
              method: str = "spectral", max_step: float = np.inf,
              tail_bound: float = TAIL_BOUND, norm_tolerance: float = NORM_TOLERANCE) -> StateVector:
    """Solve i d|psi>/dt = H |psi> from ``state.time`` to ``t_target``.

    ``spectral`` diagonalizes each tridiagonal charge sector (exact up to
    rounding); ``dop853`` integrates each sector with adaptive steps at
    relative tolerance ``tolerance``; ``expm`` applies the full sparse
    propagator and ignores the sector structure.  The result is never
    renormalized: norm drift beyond ``norm_tolerance`` is raised.
    """
    if H.space != state.space:
        raise ValueError("state and Hamiltonian live on different spaces")
    dt = float(t_target) - state.time
    if dt < 0:
        raise ValueError(f"cannot propagate backwards from t={state.time} to t={t_target}")
    if dt == 0:
        return state
    psi0 = state.amplitudes
    if method == "spectral":
        out = np.empty_like(psi0)
        for idx, w, v in H._eigensystems:
            out[idx] = v @ (np.exp(-1j * w * dt) * (v.T @ psi0[idx]))
    elif method == "dop853":
        out = np.empty_like(psi0)
        for idx, diag, off in H.blocks:
            out[idx] = _integrate_block(psi0[idx], diag, off, dt, tolerance, max_step)
    elif method == "expm":
        out = expm_multiply(-1j * dt * H.matrix, psi0)
    else:
        raise ValueError(f"unknown method {method!r}; expected one of {PROPAGATION_METHODS}")

    result = StateVector(state.space, out, float(t_target))
    drift = abs(result.norm - state.norm)
    if drift > norm_tolerance:
        raise NumericalError(f"norm drift {drift:.3g} exceeds {norm_tolerance:g} at t={t_target:g}")
    top = result.top_shell_population()
    if top > tail_bound:
        raise CutoffError(
            f"cutoff exhausted at t={t_target:g}: top-shell population {top:.3g} > {tail_bound:g}")
    return result


def _integrate_block(v0, diag, off, dt, tolerance, max_step):
    if not np.any(v0):
        return v0.copy()

    def rhs(_, v):
        hv = diag * v
        hv[:-1] += off * v[1:]
        hv[1:] += off * v[:-1]
        return -1j * hv

    sol = solve_ivp(rhs, (0.0, dt), v0.astype(complex), method="DOP853",
                    rtol=tolerance, atol=tolerance * 1e-3, max_step=max_step)
    if sol.status != 0:
        raise NumericalError(f"integrator failed (step-size underflow?): {sol.message}")
    return sol.y[:, -1]


def evolve(params: SystemParams, omega_t, space: FockSpace | None = None, **kwargs) -> list[StateVector]:
    """States at each rescaled time in ``omega_t``, each propagated from t = 0."""
    space = space or build_space(params)
    H = Hamiltonian.from_params(space, params)
    psi0 = coherent_state(space, params.alpha, params.beta)
    return [propagate(psi0, H, float(wt) / params.omega, **kwargs) for wt in np.atleast_1d(omega_t)]


# --- moments and witnesses -----------------------------------------------------


def _lower(arr: np.ndarray, q: int, axis: int) -> np.ndarray:
    """Apply an annihilator q times along ``axis``; exact on the truncated space."""
    if q == 0:
        return arr
    n = arr.shape[axis]
    out = np.zeros_like(arr)
    if q >= n:
        return out
    k = np.arange(n - q)
    # sqrt((k + q)! / k!)
    fac = np.exp(0.5 * (gammaln(k + q + 1) - gammaln(k + 1)))
    if axis == 0:
        out[: n - q, :] = fac[:, None] * arr[q:, :]
    else:
        out[:, : n - q] = fac[None, :] * arr[:, q:]
    return out


def moment_headroom(space: FockSpace) -> tuple[int, int]:
    """Largest operator powers per mode that stay clear of truncation effects."""
    return space.cutoff_a // 2, space.cutoff_b // 2


def moment(state: StateVector, p: int, q: int, r: int, s: int) -> complex:
    """<psi| (a^+)^p a^q (b^+)^r b^s |psi>."""
    ha, hb = moment_headroom(state.space)
    if max(p, q) > ha or max(r, s) > hb:
        raise CutoffError(
            f"moment orders (p,q,r,s)=({p},{q},{r},{s}) exceed cutoff headroom ({ha}, {hb})")
    psi = state.grid()
    left = _lower(_lower(psi, p, 0), r, 1)
    right = _lower(_lower(psi, q, 0), s, 1)
    return complex(np.vdot(left, right))


class _Moments:
    """Memoized normal-ordered moments of one state."""

    def __init__(self, state):
        self.state = state
        self._cache = {}

    def __call__(self, p, q, r=0, s=0):
        key = (p, q, r, s)
        if key not in self._cache:
            self._cache[key] = moment(self.state, p, q, r, s)
        return self._cache[key]

    def factorial(self, mode, k):
        return (self(k, k) if mode == "a" else self(0, 0, k, k)).real


def _variances(M, mode):
    """Quadrature variances (X, Y) of a single mode from its moments."""
    if mode == "a":
        m1, m2, nn = M(0, 1), M(0, 2), M(1, 1).real
    else:
        m1, m2, nn = M(0, 0, 0, 1), M(0, 0, 0, 2), M(0, 0, 1, 1).real
    vx = 0.25 * (1 + 2 * nn + 2 * m2.real - 4 * m1.real**2)
    vy = 0.25 * (1 + 2 * nn - 2 * m2.real - 4 * m1.imag**2)
    return vx, vy


def _compound_variances(M):
    vxa, vya = _variances(M, "a")
    vxb, vyb = _variances(M, "b")
    ab, adb = M(0, 1, 0, 1), M(1, 0, 0, 1)
    a, b = M(0, 1), M(0, 0, 0, 1)
    cov_x = 0.5 * (ab.real + adb.real) - a.real * b.real
    cov_y = 0.5 * (adb.real - ab.real) - a.imag * b.imag
    return 0.5 * (vxa + vxb + 2 * cov_x), 0.5 * (vya + vyb + 2 * cov_y)


def witness_exact(state: StateVector, kind: WitnessKind, moments=None) -> float:
    """Witness value computed from the defining moments on ``state``."""
    M = moments if moments is not None else _Moments(state)
    tag = kind.tag
    if tag in ("VarXa", "VarYa", "VarXb", "VarYb"):
        vx, vy = _variances(M, tag[-1])
        return vx if tag[3] == "X" else vy
    if tag in ("VarXab", "VarYab"):
        vx, vy = _compound_variances(M)
        return vx if tag[3] == "X" else vy
    if tag.startswith("AmpSq"):
        mode = tag[-1]
        if mode == "a":
            m2, m4, n22 = M(0, 2), M(0, 4), M(2, 2).real
        else:
            m2, m4, n22 = M(0, 0, 0, 2), M(0, 0, 0, 4), M(0, 0, 2, 2).real
        if tag[5] == "1":
            return 0.5 * (m4.real + n22) - m2.real**2
        return 0.5 * (n22 - m4.real) - m2.imag**2
    if tag in ("Da", "Db"):
        mode = tag[-1]
        return M.factorial(mode, 2) - M.factorial(mode, 1) ** 2
    if tag == "Dab":
        return M(1, 1, 1, 1).real - M(1, 1).real * M(0, 0, 1, 1).real
    if tag in ("HOAa", "HOAb"):
        mode = tag[-1]
        return M.factorial(mode, kind.n) - M.factorial(mode, 1) ** kind.n
    if tag in ("LeeRa", "LeeRb"):
        mode, l, m = tag[-1], kind.n, kind.m
        F = lambda k: M.factorial(mode, k)  # noqa: E731
        return F(l + 1) * F(m - 1) / (F(l) * F(m)) - 1.0
    if tag == "HZ1":
        return M(1, 1, 1, 1).real - abs(M(0, 1, 1, 0)) ** 2
    if tag == "HZ2":
        return M(1, 1).real * M(0, 0, 1, 1).real - abs(M(0, 1, 0, 1)) ** 2
    if tag == "HZ1Higher":
        n, m = kind.n, kind.m
        return M(n, n, m, m).real - abs(M(0, n, m, 0)) ** 2
    if tag == "HZ2Higher":
        n, m = kind.n, kind.m
        return M(n, n).real * M(0, 0, m, m).real - abs(M(0, n, 0, m)) ** 2
    if tag == "Duan":
        vx, vy = _compound_variances(M)
        return 4 * (vx + vy) - 2
    raise ValueError(f"unsupported witness {kind}")


def witnesses_exact(state: StateVector, kinds) -> list[float]:
    """Several witnesses on one state, sharing the moment cache."""
    M = _Moments(state)
    return [witness_exact(state, k, M) for k in kinds]


# --- snapshots -------------------------------------------------------------------

SNAPSHOT_HEADER = "# atommol state snapshot v1"


def dump_state(state: StateVector, path, params: SystemParams | None = None) -> None:
    """Write a portable text snapshot: header, then one ``re im`` line per basis index."""
    lines = [SNAPSHOT_HEADER,
             f"cutoff_a = {state.space.cutoff_a}",
             f"cutoff_b = {state.space.cutoff_b}",
             f"time = {float(state.time)!r}"]
    if params is not None:
        lines += [f"omega = {params.omega!r}", f"delta = {params.delta!r}",
                  f"alpha = {params.alpha.real!r} {params.alpha.imag!r}",
                  f"beta = {params.beta.real!r} {params.beta.imag!r}"]
    lines.append("amplitudes")
    lines += [f"{float(z.real)!r} {float(z.imag)!r}" for z in state.amplitudes]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_state(path) -> tuple[StateVector, SystemParams | None]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != SNAPSHOT_HEADER:
        raise ValueError(f"{path}: not a v1 state snapshot")
    meta = {}
    i = 1
    while lines[i] != "amplitudes":
        key, _, value = lines[i].partition("=")
        meta[key.strip()] = value.strip()
        i += 1
    space = FockSpace(int(meta["cutoff_a"]), int(meta["cutoff_b"]))
    data = np.array([[float(x) for x in ln.split()] for ln in lines[i + 1:] if ln.strip()])
    state = StateVector(space, data[:, 0] + 1j * data[:, 1], float(meta["time"]))
    params = None
    if "omega" in meta:
        cplx = lambda s: complex(*map(float, s.split()))  # noqa: E731
        params = SystemParams(float(meta["omega"]), float(meta["delta"]),
                              cplx(meta["alpha"]), cplx(meta["beta"]))
    return state, params
