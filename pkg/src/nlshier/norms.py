"""Discrete Sobolev, Fourier-Lebesgue and modulation norms, and estimate probes.

Norms of a :class:`FieldState` use the normalised Fourier coefficients
c_m = fft(u)/M at frequencies xi_m = 2 pi m / L, so a single mode
c e^{i N x} has every Fourier-Lebesgue norm equal to <N>^s |c|.

The probes measure ratios LHS/RHS of space-time estimates for free
solutions u(t) = exp(-i t xi^{2j}) u_0 on a window [-T_w, T_w], at the
exponents where every norm is an L^2 quantity.  Each ratio is exactly
invariant under u_0 -> lambda^{1/2} u_0(lambda x), T_w -> lambda^{-2j} T_w
in the continuum, so a frequency sweep exposes growth without reference to
any unknown constant.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .spectral import FieldState, Grid

FAMILIES = ("sobolev-Hs", "fourier-lebesgue-Hsr", "modulation-Ms2p")
ESTIMATES = ("bilinear-L2", "fefferman-stein-diag", "trilinear-L2")
INF = float("inf")


def japanese(xi):
    return np.sqrt(1.0 + np.asarray(xi, dtype=float) ** 2)


def dual_exponent(r: float) -> float:
    if r == 1:
        return INF
    if r == INF:
        return 1.0
    return r / (r - 1)


def lp_norm(values, p: float) -> float:
    a = np.abs(np.asarray(values))
    if a.size == 0:
        return 0.0
    if p == INF:
        return float(a.max())
    return float(np.sum(a ** p) ** (1.0 / p))


@dataclass(frozen=True)
class NormSpec:
    family: str
    s: float = 0.0
    r: float = 2.0  # Fourier-Lebesgue exponent
    p: float = 2.0  # modulation summability exponent

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown norm family {self.family!r}")
        if not 1 <= self.r <= INF or not 1 <= self.p <= INF:
            raise ValueError("exponents must lie in [1, inf]")


def box_cutoff(xi):
    """psi: 1 on [0, 1], cos^2 tapers on [-1/4, 0] and [1, 5/4], 0 elsewhere."""
    xi = np.asarray(xi, dtype=float)
    out = np.zeros_like(xi)
    out[(xi >= 0) & (xi <= 1)] = 1.0
    left = (xi >= -0.25) & (xi < 0)
    out[left] = np.cos(2 * np.pi * xi[left]) ** 2
    right = (xi > 1) & (xi <= 1.25)
    out[right] = np.cos(2 * np.pi * (xi[right] - 1)) ** 2
    return out


# sum_n psi(xi - n)^2 at integer xi: each integer lies in exactly two boxes
BOX_OVERLAP = 2.0


def _coefficients(state: FieldState):
    g = state.grid
    return np.fft.fft(state.values) / g.M, g.wavenumbers


def norm(state: FieldState, spec: NormSpec) -> float:
    c, xi = _coefficients(state)
    w = japanese(xi) ** spec.s
    if spec.family == "sobolev-Hs":
        return lp_norm(w * c, 2.0)
    if spec.family == "fourier-lebesgue-Hsr":
        return lp_norm(w * c, dual_exponent(spec.r))
    # modulation: boxes Box_n with symbol psi(xi - n), normalised so that
    # M^0_{2,2} equals L^2 on the 2 pi torus
    mask = np.abs(c) > 0
    if not mask.any():
        return 0.0
    lo = math.floor(xi[mask].min() - 1.25)
    hi = math.ceil(xi[mask].max() + 0.25)
    pieces = []
    for n in range(lo, hi + 1):
        psi = box_cutoff(xi - n)
        if psi.any():
            pieces.append(lp_norm(psi * w * c, 2.0))
    return lp_norm(pieces, spec.p) / math.sqrt(BOX_OVERLAP)


def l2_mean(state: FieldState) -> float:
    """sqrt(mean |u|^2), which equals the l^2 norm of the coefficients."""
    return float(np.sqrt(np.mean(np.abs(state.values) ** 2)))


# bilinear operator ----------------------------------------------------

def bilinear_symbol(j: int, sign: int, xi1, xi2):
    """k_j^{+-}(xi1, xi2) = |xi1 +- xi2| (|xi1|^{2j-2} + |xi2|^{2j-2})."""
    xi1 = np.asarray(xi1, dtype=float)
    xi2 = np.asarray(xi2, dtype=float)
    return np.abs(xi1 + sign * xi2) * (np.abs(xi1) ** (2 * j - 2) + np.abs(xi2) ** (2 * j - 2))


class _Modes:
    """Sparse spectrum of a free solution: modes, frequencies, coefficients."""

    def __init__(self, m, xi, c):
        self.m = np.asarray(m, dtype=np.int64)
        self.xi = np.asarray(xi, dtype=float)
        self.c = np.asarray(c, dtype=complex)

    @classmethod
    def of(cls, state: FieldState, rel_cut: float = 1e-13):
        c, xi = _coefficients(state)
        keep = np.abs(c) > rel_cut * max(np.abs(c).max(), 1e-300)
        return cls(state.grid.modes[keep], xi[keep], c[keep])

    def conj(self):
        # conj(u) has coefficient conj(c_{-m}) at mode m
        return _Modes(-self.m, -self.xi, np.conj(self.c))

    def at(self, j, t, conjugated=False):
        phase = self.xi ** (2 * j) * t
        return self.c * np.exp((1j if conjugated else -1j) * phase)


def _pair_tables(j, sign, a: _Modes, b: _Modes, p):
    k = bilinear_symbol(j, sign, a.xi[:, None], b.xi[None, :]) ** (1.0 / p)
    target = (a.m[:, None] + b.m[None, :]).ravel()
    uniq, inv = np.unique(target, return_inverse=True)
    return k, uniq, inv


def bilinear_coefficients(j, sign, p, u0: FieldState, v0: FieldState, times):
    """Fourier coefficients of I^{+-}_{p,j}(u, v_{+-}) at each time.

    For sign +1 the second factor is conj(v), for -1 it is v.  Returns the
    output mode numbers and an array (len(times), len(modes)).
    """
    a = _Modes.of(u0)
    b0 = _Modes.of(v0)
    b = b0.conj() if sign > 0 else b0
    k, uniq, inv = _pair_tables(j, sign, a, b, p)
    out = np.zeros((len(times), len(uniq)), dtype=complex)
    for i, t in enumerate(times):
        prod = (a.at(j, t)[:, None] * b.at(j, t, conjugated=sign > 0)[None, :] * k).ravel()
        out[i] = (np.bincount(inv, prod.real, len(uniq)) + 1j * np.bincount(inv, prod.imag, len(uniq)))
    return uniq, out


def bilinear_apply(j: int, sign: int, p: float, u0: FieldState, v0: FieldState, times):
    """I^{+-}_{p,j}(u, v_{+-}) sampled on a grid wide enough to hold every output mode.

    Returns ``(grid, values)`` with values of shape (len(times), M).
    """
    modes, coeffs = bilinear_coefficients(j, sign, p, u0, v0, times)
    g = u0.grid
    M = g.M
    while modes.size and (modes.max() >= M // 2 or modes.min() < -M // 2):
        M *= 2
    out_grid = Grid(g.L, M, g.x0)
    spec = np.zeros((len(times), M), dtype=complex)
    spec[:, modes % M] = coeffs
    # undo the grid offset so values sit at out_grid.x
    shift = np.exp(2j * np.pi * np.fft.fftfreq(M, 1.0 / M) * g.x0 / g.L)
    vals = np.fft.ifft(spec * shift[None, :], axis=1) * M
    return out_grid, vals


# probes ---------------------------------------------------------------

@dataclass
class ProbeSetup:
    """Box, data law and window for the probes.

    Frequencies are in units where the unscaled packets live in
    1 <= |xi_c| <= 2 with widths in [0.15, 0.3].
    """

    L: float = 20 * math.pi
    center_range: tuple = (1.0, 2.0)
    width_range: tuple = (0.15, 0.3)
    packets: int = 2
    window_fraction: float = 0.1  # T_w * v_max / L at lambda = 1
    time_nodes: int = 64
    cutoff_sigmas: float = 5.0

    def xi_top(self):
        return self.center_range[1] + self.cutoff_sigmas * self.width_range[1]

    def window(self, j: int, lam: float) -> float:
        v = 2 * j * self.xi_top() ** (2 * j - 1)
        return self.window_fraction * self.L / v * lam ** (-2 * j)

    def grid(self, lam_max: float) -> Grid:
        need = lam_max * self.xi_top() * self.L / (2 * math.pi)
        M = 16
        while M // 2 <= need:
            M *= 2
        return Grid(self.L, M)


def random_packet_params(rng: np.random.Generator, setup: ProbeSetup):
    out = []
    for _ in range(setup.packets):
        xc = rng.uniform(*setup.center_range) * rng.choice((-1.0, 1.0))
        w = rng.uniform(*setup.width_range)
        amp = complex(rng.normal(), rng.normal())
        x0 = rng.uniform(-0.1, 0.1) * setup.L
        out.append((xc, w, amp, x0))
    return out


def packet_state(params, grid: Grid, lam: float, cutoff_sigmas: float = 5.0) -> FieldState:
    """Sum of Gaussian packets, frequency-scaled with L^2 preserved."""
    xi = grid.wavenumbers
    c = np.zeros(grid.M, dtype=complex)
    for xc, w, amp, x0 in params:
        z = (xi / lam - xc) / w
        g = amp * np.exp(-0.5 * z ** 2) * np.exp(-1j * xi * (x0 / lam - grid.x0))
        g[np.abs(z) > cutoff_sigmas] = 0.0
        c += g / math.sqrt(lam)
    return FieldState(grid, np.fft.ifft(c) * grid.M)


def _gauss_times(T, n):
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return nodes * T, weights * T


def _l2_data(state: FieldState, weight_power: float = 0.0) -> float:
    """Continuum L^2 norm of |D|^{weight_power} u_0 (zero mode dropped if weighted)."""
    c, xi = _coefficients(state)
    w = np.ones_like(xi)
    if weight_power:
        with np.errstate(divide="ignore"):
            w = np.where(xi == 0, 0.0, np.abs(xi) ** weight_power)
    return float(math.sqrt(state.grid.L * np.sum(np.abs(w * c) ** 2)))


def _free_space_time(state: FieldState, j: int, times, Mp: int, deriv_power: float = 0.0):
    """Free solution |D|^{deriv_power} u(t) on an Mp-point grid for each t."""
    m = _Modes.of(state)
    w = np.abs(m.xi) ** deriv_power if deriv_power else np.ones_like(m.xi)
    out = np.empty((len(times), Mp), dtype=complex)
    idx = m.m % Mp
    for i, t in enumerate(times):
        spec = np.zeros(Mp, dtype=complex)
        spec[idx] = w * m.at(j, t)
        out[i] = np.fft.ifft(spec) * Mp
    return out


def _oversampled_size(states, factor):
    K = max((int(np.abs(_Modes.of(s).m).max()) if np.abs(s.values).any() else 0) for s in states)
    Mp = 16
    while Mp <= factor * K:
        Mp *= 2
    return Mp


def probe_ratio(estimate: str, j: int, states, T: float, nodes: int = 64,
                exponent_shift: float = 0.0) -> float:
    """LHS/RHS of one estimate for given data on the window [-T, T]; 0 for zero data.

    ``exponent_shift`` is added to the derivative gain on the left; any nonzero
    value breaks scale invariance and is only useful as a control.
    """
    if any(not np.abs(s.values).any() for s in states):
        return 0.0
    times, weights = _gauss_times(T, nodes)
    L = states[0].grid.L
    if estimate == "bilinear-L2":
        u0, v0 = states
        best = 0.0
        for sign in (1, -1):
            _, coeffs = bilinear_coefficients(j, sign, 2.0 / (1 + exponent_shift), u0, v0, times)
            lhs2 = L * np.sum(weights * np.sum(np.abs(coeffs) ** 2, axis=1))
            best = max(best, math.sqrt(lhs2) / (_l2_data(u0) * _l2_data(v0)))
        return best
    if estimate == "fefferman-stein-diag":
        (u0,) = states
        s = (j - 1) / 3 + exponent_shift
        Mp = _oversampled_size(states, 6)
        f = _free_space_time(u0, j, times, Mp, s)
        lhs6 = L / Mp * np.sum(weights * np.sum(np.abs(f) ** 6, axis=1))
        return lhs6 ** (1 / 6) / _l2_data(u0)
    if estimate == "trilinear-L2":
        u0, v0, w0 = states
        s = (j - 1) / 3  # s0 = s1, so s0 + 2 s1 = j - 1
        Mp = _oversampled_size(states, 6)
        prod = (_free_space_time(u0, j, times, Mp) * _free_space_time(v0, j, times, Mp)
                * np.conj(_free_space_time(w0, j, times, Mp)))
        lhs2 = L / Mp * np.sum(weights * np.sum(np.abs(prod) ** 2, axis=1))
        s0 = s - exponent_shift
        rhs = _l2_data(u0, -s0) * _l2_data(v0, -s) * _l2_data(w0, -s)
        return math.sqrt(lhs2) / rhs
    raise ValueError(f"unknown estimate {estimate!r}")


_ARITY = {"bilinear-L2": 2, "fefferman-stein-diag": 1, "trilinear-L2": 3}


@dataclass
class ProbeReport:
    estimate: str
    j: int
    samples: int
    max_ratio: float
    median_ratio: float
    lambda_sweep: list = field(default_factory=list)
    worst_case_seed: int | None = None
    bounded: bool = True
    window_bias: float = 0.0

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2,
                          default=lambda x: float(x)) + "\n"


def sample_ratio(estimate, j, seed, lam, setup: ProbeSetup, grid: Grid, window_scale=1.0,
                 exponent_shift=0.0):
    rng = np.random.default_rng(seed)
    states = [packet_state(random_packet_params(rng, setup), grid, lam, setup.cutoff_sigmas)
              for _ in range(_ARITY[estimate])]
    return probe_ratio(estimate, j, states, setup.window(j, lam) * window_scale,
                       setup.time_nodes, exponent_shift)


def probe_estimate(estimate: str, j: int, samples: int = 100, seed: int = 0,
                   lambdas=(1, 2, 4, 8), setup: ProbeSetup | None = None,
                   growth_limit: float = 2.0) -> ProbeReport:
    """Ratio statistics over ``samples`` seeds (seed, seed+1, ...) and a frequency sweep.

    ``bounded`` holds when the max ratio at every lambda stays within
    ``growth_limit`` of its value at the first lambda.  ``window_bias`` is the
    relative change of the median ratio at the first lambda when T_w doubles.
    """
    if estimate not in ESTIMATES:
        raise ValueError(f"unknown estimate {estimate!r}")
    setup = setup or ProbeSetup()
    grid = setup.grid(max(lambdas))
    sweep = []
    for lam in lambdas:
        ratios = [sample_ratio(estimate, j, seed + i, lam, setup, grid) for i in range(samples)]
        worst = int(np.argmax(ratios))
        sweep.append({"lambda": lam, "max_ratio": float(max(ratios)),
                      "median_ratio": float(np.median(ratios)), "worst_case_seed": seed + worst})
    base = sweep[0]
    bounded = all(e["max_ratio"] <= growth_limit * base["max_ratio"] for e in sweep)
    nb = min(samples, 10)
    doubled = [sample_ratio(estimate, j, seed + i, lambdas[0], setup, grid, 2.0) for i in range(nb)]
    single = [sample_ratio(estimate, j, seed + i, lambdas[0], setup, grid) for i in range(nb)]
    bias = float(abs(np.median(doubled) - np.median(single)) / max(np.median(single), 1e-300))
    return ProbeReport(estimate, j, samples, base["max_ratio"], base["median_ratio"], sweep,
                       base["worst_case_seed"], bounded, bias)
