"""Periodic pseudospectral integration of NLS-like equations.

The unknown solves i u_t + (-1)^{j+1} d_x^{2j} u = F(u) with F given by a
:class:`CoefficientTable`.  In Fourier variables (numpy's unnormalised FFT)
this reads

    d/dt u_hat = -i xi^{2j} u_hat - i FFT(F(u)),

since (-1)^{j+1} (i xi)^{2j} = -xi^{2j} for every j.  Time stepping is ETDRK4
with contour-averaged phi functions; products are dealiased by zero padding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .diffpoly import DiffPolynomial
from .hierarchy import CoefficientTable

CONTOUR_POINTS = 32


class NumericAbort(RuntimeError):
    def __init__(self, step, time, message="non-finite field"):
        super().__init__(f"{message} at step {step} (t = {time:.17g})")
        self.step = step
        self.time = time


@dataclass(frozen=True)
class Grid:
    L: float
    M: int
    x0: float | None = None

    def __post_init__(self):
        if self.L <= 0 or self.M < 2 or self.M % 2:
            raise ValueError("need L > 0 and even M >= 2")
        if self.x0 is None:
            object.__setattr__(self, "x0", -self.L / 2)

    @classmethod
    def torus(cls, M: int) -> "Grid":
        return cls(2 * math.pi, M, 0.0)

    @property
    def dx(self) -> float:
        return self.L / self.M

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.M)

    @property
    def modes(self) -> np.ndarray:
        """Integer mode numbers in FFT order; the Nyquist mode is -M/2."""
        return np.fft.fftfreq(self.M, 1.0 / self.M).astype(np.int64)

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2 * math.pi / self.L * self.modes

    def derivative_multiplier(self, order: int) -> np.ndarray:
        mult = (1j * self.wavenumbers) ** order
        if order % 2:
            mult[self.M // 2] = 0.0
        return mult


@dataclass
class FieldState:
    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.M,):
            raise ValueError("values do not match the grid")

    @classmethod
    def from_function(cls, grid: Grid, fn, time: float = 0.0) -> "FieldState":
        return cls(grid, fn(grid.x), time)

    @property
    def spectrum(self) -> np.ndarray:
        return np.fft.fft(self.values)

    def l2(self) -> float:
        """sqrt(dx sum |u|^2), the L^2 norm over one period."""
        return float(np.sqrt(self.grid.dx * np.sum(np.abs(self.values) ** 2)))


def l2_distance(a, b, grid: Grid) -> float:
    return float(np.sqrt(grid.dx * np.sum(np.abs(np.asarray(a) - np.asarray(b)) ** 2)))


@dataclass(frozen=True)
class SimConfig:
    dt: float
    T: float
    dealias_pad: Fraction | None = None
    conserved_indices: tuple = ()
    snapshot_stride: int = 1

    def __post_init__(self):
        if not self.dt > 0 or self.T < 0 or self.snapshot_stride < 1:
            raise ValueError("need dt > 0, T >= 0 and snapshot_stride >= 1")
        if self.dealias_pad is not None:
            object.__setattr__(self, "dealias_pad", Fraction(self.dealias_pad))

    def pad_for(self, table: CoefficientTable) -> Fraction:
        need = required_pad(table)
        if self.dealias_pad is None:
            return need
        if self.dealias_pad < need:
            raise ValueError(f"dealias pad {self.dealias_pad} below the required {need}")
        return self.dealias_pad


def required_pad(table: CoefficientTable) -> Fraction:
    """(d_max + 1)/2 for the largest product degree d_max."""
    return Fraction(max(table.max_degree, 1) + 1, 2)


def linear_phase(j: int, grid: Grid, dt: float) -> np.ndarray:
    return np.exp(-1j * dt * grid.wavenumbers ** (2 * j))


def linear_symbol(j: int, grid: Grid) -> np.ndarray:
    return -1j * grid.wavenumbers ** (2 * j)


# dealiased products ---------------------------------------------------

def _padded_size(M: int, pad: Fraction) -> int:
    Mp = math.ceil(pad * M)
    return Mp + (Mp % 2)


def _pad_spectrum(c: np.ndarray, Mp: int) -> np.ndarray:
    M = len(c)
    if Mp == M:
        return c.copy()
    h = M // 2
    out = np.zeros(Mp, dtype=complex)
    out[:h] = c[:h]
    out[Mp - h + 1:] = c[h + 1:]
    # split the Nyquist coefficient over +-M/2 so real signals stay real
    out[h] = 0.5 * c[h]
    out[Mp - h] = 0.5 * c[h]
    return out


def _truncate_spectrum(c: np.ndarray, M: int) -> np.ndarray:
    Mp = len(c)
    h = M // 2
    out = np.zeros(M, dtype=complex)
    out[:h] = c[:h]
    out[h + 1:] = c[Mp - h + 1:]
    return out


class _Nonlinearity:
    """Evaluator of -i FFT(F(u)) for a fixed table, grid and pad."""

    def __init__(self, table: CoefficientTable, grid: Grid, pad: Fraction):
        if pad < required_pad(table):
            raise ValueError(f"pad {pad} below (d_max+1)/2 = {required_pad(table)}")
        self.table = table
        self.grid = grid
        self.M = grid.M
        self.Mp = _padded_size(grid.M, Fraction(pad))
        self.orders = sorted({a for e in table.entries for a in e.alpha})
        self.mult = {a: grid.derivative_multiplier(a) for a in self.orders}
        self.coeffs = [complex(e.coeff) for e in table.entries]

    def __call__(self, uhat: np.ndarray) -> np.ndarray:
        if not self.table.entries:
            return np.zeros_like(uhat)
        scale = self.Mp / self.M
        phys = {}
        for a in self.orders:
            phys[a] = np.fft.ifft(_pad_spectrum(uhat * self.mult[a], self.Mp)) * scale
        total = np.zeros(self.Mp, dtype=complex)
        for e, c in zip(self.table.entries, self.coeffs):
            term = np.full(self.Mp, c, dtype=complex)
            for a, b in zip(e.alpha, e.conj):
                term = term * (np.conj(phys[a]) if b == "-" else phys[a])
            total += term
        out = _truncate_spectrum(np.fft.fft(total), self.M) / scale
        return -1j * out


def eval_rhs(table: CoefficientTable, state: FieldState, pad=None) -> np.ndarray:
    """-i FFT(F(u)) with F evaluated on the zero-padded grid.

    Returned in numpy's unnormalised FFT convention, i.e. the nonlinear part
    of d/dt fft(u).  ``pad`` defaults to the minimal admissible value.
    """
    pad = required_pad(table) if pad is None else Fraction(pad)
    return _Nonlinearity(table, state.grid, pad)(state.spectrum)


def nonlinearity_physical(table: CoefficientTable, state: FieldState, pad=None) -> np.ndarray:
    """F(u) on the grid, dealiased."""
    return np.fft.ifft(1j * eval_rhs(table, state, pad))


# time stepping --------------------------------------------------------

def etdrk4_coefficients(Lh: np.ndarray, h: float, points: int = CONTOUR_POINTS):
    """E, E2, Q, f1, f2, f3 for the diagonal linear operator with h*L = ``Lh``.

    The phi functions are averaged over a full circle of radius one around
    each h*L to avoid cancellation near zero.  L is imaginary here, so the
    half-circle-plus-real-part shortcut for real L does not apply.
    """
    E = np.exp(Lh)
    E2 = np.exp(Lh / 2)
    r = np.exp(2j * math.pi * (np.arange(1, points + 1) - 0.5) / points)
    LR = Lh[:, None] + r[None, :]
    Q = h * np.mean((np.exp(LR / 2) - 1) / LR, axis=1)
    eLR = np.exp(LR)
    f1 = h * np.mean((-4 - LR + eLR * (4 - 3 * LR + LR ** 2)) / LR ** 3, axis=1)
    f2 = h * np.mean((2 + LR + eLR * (LR - 2)) / LR ** 3, axis=1)
    f3 = h * np.mean((-4 - 3 * LR - LR ** 2 + eLR * (4 - LR)) / LR ** 3, axis=1)
    return E, E2, Q, f1, f2, f3


@dataclass
class Trajectory:
    states: list = field(default_factory=list)
    dt: float = 0.0
    steps: int = 0

    @property
    def final(self) -> FieldState:
        return self.states[-1]

    @property
    def times(self):
        return [s.time for s in self.states]


def step_count(T: float, dt: float) -> int:
    return max(0, math.ceil(T / dt - 1e-9))


def integrate(table: CoefficientTable, u0: FieldState, cfg: SimConfig) -> Trajectory:
    """ETDRK4 trajectory from u0 to time u0.time + T.

    The step is shrunk so an integer number of steps lands on T exactly.
    Snapshots are kept every ``snapshot_stride`` steps plus the final state.
    """
    grid = u0.grid
    if not np.all(np.isfinite(u0.values)):
        raise NumericAbort(0, u0.time, "non-finite initial data")
    n = step_count(cfg.T, cfg.dt)
    traj = Trajectory([FieldState(grid, u0.values.copy(), u0.time)], 0.0, n)
    if n == 0:
        return traj
    h = cfg.T / n
    traj.dt = h
    Nl = _Nonlinearity(table, grid, cfg.pad_for(table))
    E, E2, Q, f1, f2, f3 = etdrk4_coefficients(h * linear_symbol(table.j, grid), h)
    v = u0.spectrum
    free = not table.entries
    for s in range(1, n + 1):
        if free:
            v = E * v
        else:
            Nv = Nl(v)
            a = E2 * v + Q * Nv
            Na = Nl(a)
            b = E2 * v + Q * Na
            Nb = Nl(b)
            c = E2 * a + Q * (2 * Nb - Nv)
            Nc = Nl(c)
            v = E * v + Nv * f1 + 2 * (Na + Nb) * f2 + Nc * f3
        t = u0.time + s * h
        if not np.all(np.isfinite(v)):
            raise NumericAbort(s, t)
        if s % cfg.snapshot_stride == 0 or s == n:
            traj.states.append(FieldState(grid, np.fft.ifft(v), t))
    return traj


def free_evolution(j: int, u0: FieldState, t: float) -> FieldState:
    return FieldState(u0.grid, np.fft.ifft(np.exp(-1j * t * u0.grid.wavenumbers ** (2 * j))
                                           * u0.spectrum), u0.time + t)


# conservation monitoring ----------------------------------------------

class DensityEvaluator:
    """Numeric integral of a {u, ubar} density over one period."""

    def __init__(self, density: DiffPolynomial):
        if density.variables() - {"u", "ubar"}:
            raise ValueError("density must be written in u and ubar")
        self.density = density
        self.terms = [(complex(c), key) for key, c in density.terms.items()]
        self.orders = sorted({s.order for _, key in self.terms for s, _ in key})

    def __call__(self, state: FieldState) -> complex:
        g = state.grid
        uhat = state.spectrum
        d = {a: np.fft.ifft(uhat * g.derivative_multiplier(a)) for a in self.orders}
        total = np.zeros(g.M, dtype=complex)
        for c, key in self.terms:
            term = np.full(g.M, c, dtype=complex)
            for s, m in key:
                f = d[s.order] if s.variable == "u" else np.conj(d[s.order])
                term = term * f ** m
            total += term
        return complex(g.dx * np.sum(total))


@dataclass
class DriftTable:
    labels: list
    times: list
    values: list  # per density, list of complex values
    drift: list  # per density, relative drift

    def rows(self):
        for i, t in enumerate(self.times):
            yield t, [v[i] for v in self.values]


def conserved_scan(densities, trajectory: Trajectory, labels=None, eps: float = 1e-300) -> DriftTable:
    """max_t |I(t) - I(0)| / (|I(0)| + eps) for each density."""
    evals = [DensityEvaluator(d) for d in densities]
    labels = list(labels) if labels else [f"I{i}" for i in range(len(evals))]
    values = [[ev(s) for s in trajectory.states] for ev in evals]
    drift = [max(abs(v - vals[0]) for v in vals) / (abs(vals[0]) + eps) for vals in values]
    return DriftTable(labels, trajectory.times, values, drift)


# convergence ----------------------------------------------------------

@dataclass
class ConvergenceResult:
    dts: list
    errors: list
    order: float


def fitted_order(dts, errors) -> float:
    if min(errors) <= 0:
        return float("nan")  # exact at every dt, no slope to fit
    x = np.log(np.asarray(dts, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def convergence_study(table: CoefficientTable, exact, dts, grid: Grid, T: float,
                      pad=None) -> ConvergenceResult:
    """Error at T against ``exact`` (anything with ``value(x, t)``) for each dt."""
    u0 = FieldState(grid, exact.value(grid.x, 0.0))
    ref = exact.value(grid.x, T)
    errors = []
    for dt in dts:
        traj = integrate(table, u0, SimConfig(dt=dt, T=T, dealias_pad=pad, snapshot_stride=10 ** 9))
        errors.append(l2_distance(traj.final.values, ref, grid))
    return ConvergenceResult(list(dts), errors, fitted_order(dts, errors))


@dataclass
class StepSelection:
    dt: float
    history: list  # (dt, relative L2 change against the previous dt)


def select_dt(table: CoefficientTable, u0: FieldState, T: float, dt0: float,
              tol: float = 1e-9, max_halvings: int = 12, pad=None) -> StepSelection:
    """Halve dt from ``dt0`` until the final state changes by less than ``tol`` (relative L^2).

    Self-convergence needs no exact solution; with a fourth-order scheme the
    change between dt and dt/2 is about 15/16 of the error at dt.  The larger
    of the last two agreeing steps is returned.
    """
    def run(dt):
        cfg = SimConfig(dt=dt, T=T, dealias_pad=pad, snapshot_stride=10 ** 9)
        return integrate(table, u0, cfg).final.values

    dt, prev = dt0, run(dt0)
    scale = max(l2_distance(prev, 0 * prev, u0.grid), 1e-300)
    history = []
    for _ in range(max_halvings):
        cur = run(dt / 2)
        change = l2_distance(cur, prev, u0.grid) / scale
        history.append((dt / 2, change))
        if change < tol:
            return StepSelection(dt, history)
        dt, prev = dt / 2, cur
    raise RuntimeError(f"no dt below {dt0} met the self-convergence tolerance {tol}")


def random_smooth_data(grid: Grid, max_mode: int = 6, amplitude: float = 0.05,
                       seed: int = 0) -> FieldState:
    """Trigonometric polynomial with Gaussian-weighted random coefficients on |m| <= max_mode."""
    rng = np.random.default_rng(seed)
    ks = np.arange(-max_mode, max_mode + 1)
    vals = (rng.normal(size=ks.size) + 1j * rng.normal(size=ks.size)) * np.exp(-(ks / max_mode) ** 2)
    c = np.zeros(grid.M, dtype=complex)
    c[ks % grid.M] = amplitude * vals
    return FieldState(grid, np.fft.ifft(c) * grid.M)
