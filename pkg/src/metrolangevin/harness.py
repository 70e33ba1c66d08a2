"""Strong-error measurement with pathwise Brownian coupling, plus diagnostics.

A study fixes one fine Wiener grid per realization; the reference (an
unadjusted fine-step integrator) and every coarse run consume windows of
that same grid, so the terminal-time RMS difference isolates integrator
error.  Overdamped schemes take plain window sums of the increments;
inertial schemes take left-point exponentially weighted sums that
discretize the Ornstein-Uhlenbeck integrals

    sqrt(2 gamma / beta) int_a^b exp(-gamma (b - s) / m) dW(s),

with the same construction on both sides of the comparison.  Metropolis
coins live in streams independent of the Brownian numbers and of each
other across step sizes.

Also here: log-log order fitting, the quadrature CDF used for
inverse-transform equilibrium sampling and Kolmogorov-Smirnov checks,
rejection-rate scaling and long-chain ergodicity studies.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Union

import numpy as np
from scipy import stats

from . import _kernels
from .models import (InertialModel, ModelError, PhaseState, PotentialModel,
                     _as_vector, polynomial_coefficients)
from .inertial import METHOD_IDS as INERTIAL_METHODS
from .inertial import ou_decay, ou_variance, run_inertial_chain
from .overdamped import METHOD_IDS as OVERDAMPED_METHODS
from .overdamped import run_overdamped_chain
from .rng import RngStreamSpec, stream_generator


class StudyAbort(RuntimeError):
    """A study-level validity guard failed (discard budget, blow-up, bad sums)."""


class TrajectoryBlowup(RuntimeError):
    """A trajectory exceeded the blow-up guard at the recorded step."""

    def __init__(self, step: int):
        super().__init__(f"trajectory exceeded the blow-up guard at step {step}")
        self.step = step


# ---------------------------------------------------------------------------
# Brownian grids and coupling

@dataclass(frozen=True, eq=False)
class BrownianIncrementGrid:
    """Fine-resolution Wiener increments, one row per grid interval.

    The single source of randomness shared between an integrator and its
    reference trajectory; rows are i.i.d. N(0, h_fine I).
    """

    horizon: float
    h_fine: float
    increments: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.increments.shape[0]

    @property
    def dimension(self) -> int:
        return self.increments.shape[1]


def _integer_ratio(value: float, unit: float, what: str) -> int:
    ratio = value / unit
    rounded = round(ratio)
    if rounded < 1 or abs(ratio - rounded) > 1e-12 * max(1.0, abs(ratio)):
        raise ValueError(f"{what}: {value} is not an integer multiple of {unit}")
    return rounded


def generate_brownian_grid(horizon: float, h_fine: float, n: int,
                           spec: RngStreamSpec) -> BrownianIncrementGrid:
    """Draw the full fine grid for one realization, deterministically per spec."""
    if not (horizon > 0 and h_fine > 0):
        raise ValueError("horizon and h_fine must be positive")
    rows = _integer_ratio(horizon, h_fine, "grid")
    gen = stream_generator(spec)
    increments = gen.standard_normal((rows, n)) * math.sqrt(h_fine)
    increments.setflags(write=False)
    return BrownianIncrementGrid(float(horizon), float(h_fine), increments)


def _sum_rows(window: np.ndarray) -> np.ndarray:
    # Pairwise for power-of-two windows so nested coarsenings agree exactly.
    m = window.shape[0]
    if m & (m - 1) == 0:
        while window.shape[0] > 1:
            window = window[0::2] + window[1::2]
        return window[0]
    out = window[0].copy()
    for i in range(1, m):
        out = out + window[i]
    return out


def coarse_increments(grid: BrownianIncrementGrid, h: float) -> np.ndarray:
    """All Wiener increments at resolution h, as window sums of the fine rows."""
    ratio = _integer_ratio(h, grid.h_fine, "coarse step")
    if grid.n_rows % ratio:
        raise ValueError("coarse step does not tile the grid")
    if ratio & (ratio - 1) == 0:
        out = grid.increments
        while out.shape[0] * ratio > grid.n_rows:
            out = out[0::2] + out[1::2]
        return out
    blocks = grid.increments.reshape(-1, ratio, grid.dimension)
    out = blocks[:, 0, :].copy()
    for i in range(1, ratio):
        out += blocks[:, i, :]
    return out


def coarse_increment(grid: BrownianIncrementGrid, h: float, k: int) -> np.ndarray:
    """The Wiener increment over [k h, (k+1) h), summed from the fine rows."""
    ratio = _integer_ratio(h, grid.h_fine, "coarse step")
    n_coarse = grid.n_rows // ratio
    if not 0 <= k < n_coarse:
        raise IndexError(f"step index {k} outside 0..{n_coarse - 1}")
    return _sum_rows(grid.increments[k * ratio:(k + 1) * ratio])


def _grid_index(grid: BrownianIncrementGrid, t: float, what: str) -> int:
    idx = t / grid.h_fine
    rounded = round(idx)
    if abs(idx - rounded) > 1e-9 or not 0 <= rounded <= grid.n_rows:
        raise ValueError(f"{what} {t} is not on the fine grid")
    return rounded


def _ou_weights(model: InertialModel, grid: BrownianIncrementGrid,
                rows_per_half: int) -> np.ndarray:
    # Left-point weights exp(-gamma (b - s_i) / m): distances are
    # (rows_per_half - i) h_fine from each half-interval's right endpoint.
    dist = (rows_per_half - np.arange(rows_per_half)) * grid.h_fine
    w = np.exp(-model.gamma * np.outer(dist, 1.0 / model.mass))
    return math.sqrt(2.0 * model.gamma / model.beta) * w


def coarse_ou_integral(grid: BrownianIncrementGrid, model: InertialModel,
                       a: float, b: float) -> np.ndarray:
    """Discretized OU integral over [a, b) with decay toward the endpoint b."""
    i0 = _grid_index(grid, a, "interval start")
    i1 = _grid_index(grid, b, "interval end")
    if i1 <= i0:
        raise ValueError("interval must have positive length")
    w = _ou_weights(model, grid, i1 - i0)
    return np.einsum("rn,rn->n", grid.increments[i0:i1], w)


def coarse_ou_integrals(grid: BrownianIncrementGrid, model: InertialModel,
                        h: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-step OU integrals (xi1, xi2) over both halves of every step of size h."""
    ratio = _integer_ratio(h, grid.h_fine, "coarse step")
    if ratio % 2 or grid.n_rows % ratio:
        raise ValueError("step must span an even number of grid rows and tile the grid")
    half = ratio // 2
    blocks = grid.increments.reshape(-1, ratio, grid.dimension)
    w = _ou_weights(model, grid, half)
    xi1 = np.einsum("krn,rn->kn", blocks[:, :half, :], w)
    xi2 = np.einsum("krn,rn->kn", blocks[:, half:, :], w)
    return np.ascontiguousarray(xi1), np.ascontiguousarray(xi2)


# ---------------------------------------------------------------------------
# Reference trajectories

def _em_terminal(model: PotentialModel, x0: np.ndarray, h: float,
                 dw: np.ndarray, zetas: np.ndarray, method: str,
                 guard: float) -> np.ndarray:
    """Terminal state of an overdamped chain run, via the kernel backend."""
    x = np.array(x0, dtype=float)
    if model.u_coeffs is not None:
        u_c, du_c = polynomial_coefficients(model)
        blow = _kernels.overdamped_terminal(OVERDAMPED_METHODS[method], u_c, du_c,
                                            model.beta, h, guard, x, dw, zetas)
    else:
        trace = run_overdamped_chain(model, method, x0, h, dw.shape[0], 0,
                                     blowup_guard=guard, increments=dw,
                                     uniforms=zetas if zetas.size else None)
        if trace.blew_up:
            raise TrajectoryBlowup(trace.blowup_step)
        return trace.states[-1]
    if blow:
        raise TrajectoryBlowup(blow)
    return x


def _gla_terminal(model: InertialModel, state0: PhaseState, h: float,
                  xi1: np.ndarray, xi2: np.ndarray, zetas: np.ndarray,
                  method: str, guard: float) -> PhaseState:
    q = np.array(state0.q, dtype=float)
    p = np.array(state0.p, dtype=float)
    if model.base.u_coeffs is not None:
        u_c, du_c = polynomial_coefficients(model.base)
        blow = _kernels.inertial_terminal(INERTIAL_METHODS[method], u_c, du_c,
                                          model.beta, h, guard, 1.0 / model.mass,
                                          ou_decay(model, 0.5 * h), q, p,
                                          xi1, xi2, zetas)
    else:
        trace = run_inertial_chain(model, method, state0, h, xi1.shape[0], 0,
                                   blowup_guard=guard, ou_noise=(xi1, xi2),
                                   uniforms=zetas if zetas.size else None)
        if trace.blew_up:
            raise TrajectoryBlowup(trace.blowup_step)
        return PhaseState(trace.qs[-1], trace.ps[-1])
    if blow:
        raise TrajectoryBlowup(blow)
    return PhaseState(q, p)


def reference_trajectory(model: Union[PotentialModel, InertialModel],
                         grid: BrownianIncrementGrid, scheme: Optional[str] = None,
                         *, x0, blowup_guard: float = 1e8):
    """Terminal state of the fine-step unadjusted reference on the full grid.

    Overdamped models run Euler-Maruyama at the grid resolution; inertial
    models run GLA at twice the grid resolution, so each OU half-flow
    spans exactly one grid row.  Raises TrajectoryBlowup when the guard
    trips; the caller decides whether that discards the realization.
    """
    no_zetas = np.empty(0)
    if isinstance(model, InertialModel):
        if scheme not in (None, "gla"):
            raise ValueError(f"unsupported inertial reference scheme {scheme!r}")
        h_ref = 2.0 * grid.h_fine
        xi1, xi2 = coarse_ou_integrals(grid, model, h_ref)
        return _gla_terminal(model, x0, h_ref, xi1, xi2, no_zetas, "gla", blowup_guard)
    if scheme not in (None, "euler-maruyama"):
        raise ValueError(f"unsupported overdamped reference scheme {scheme!r}")
    return _em_terminal(model, _as_vector(x0, model.dimension), grid.h_fine,
                        grid.increments, no_zetas, "ula", blowup_guard)


# ---------------------------------------------------------------------------
# Order fitting

class OrderFit(NamedTuple):
    slope: float
    intercept: float
    half_width: float


def fit_order(h_values, rms_values) -> OrderFit:
    """Least squares on (log h, log rms) with a 95% slope half-width."""
    h = np.asarray(h_values, dtype=float)
    r = np.asarray(rms_values, dtype=float)
    if h.size < 3:
        raise ValueError("order fit needs at least 3 points")
    if np.any(h <= 0) or np.any(r <= 0):
        raise ValueError("order fit needs positive step sizes and errors")
    lx = np.log(h)
    ly = np.log(r)
    dx = lx - lx.mean()
    sxx = float(dx @ dx)
    slope = float(dx @ (ly - ly.mean())) / sxx
    intercept = float(ly.mean() - slope * lx.mean())
    resid = ly - (intercept + slope * lx)
    dof = h.size - 2
    sigma2 = float(resid @ resid) / dof
    half_width = math.sqrt(sigma2 / sxx) * float(stats.t.ppf(0.975, dof))
    return OrderFit(slope, intercept, half_width)


# ---------------------------------------------------------------------------
# Quadrature CDF, equilibrium sampling, KS distance

def _energy_at_points(model: PotentialModel, xs: np.ndarray) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    if model.u_coeffs is not None:
        return np.asarray(model.energy(xs[..., None]), dtype=float)
    flat = np.ravel(xs)
    vals = np.array([model.energy_checked(np.array([v])) for v in flat])
    return vals.reshape(xs.shape)


class QuadratureCdf:
    """Numeric CDF of the 1-D density proportional to exp(-beta U).

    The domain is truncated to [-L, L], doubling L until the convexity
    tail bound exp(-beta U(L)) / (beta |U'(L)|) drops below tail_bound
    times the running normalization on each side.  Panel masses come from
    fixed-order Gauss-Legendre quadrature; cdf() integrates the partial
    panel on demand and ppf() inverts by bisection, both vectorized.
    """

    _GL_ORDER = 16

    def __init__(self, model: PotentialModel, n_panels: int = 2048,
                 tail_bound: float = 1e-12):
        if model.dimension != 1:
            raise ModelError("quadrature CDF requires a 1-D model")
        self._model = model
        self._beta = model.beta
        self._nodes_ref, self._weights_ref = np.polynomial.legendre.leggauss(self._GL_ORDER)
        length = 1.0
        while True:
            self._build(length, n_panels)
            if self._tails_below(length, tail_bound):
                break
            length *= 2.0
            if length > 1e6:
                raise ModelError("density looks non-integrable: tail bound never met")

    def _log_density(self, xs: np.ndarray) -> np.ndarray:
        return -self._beta * _energy_at_points(self._model, xs)

    def _build(self, length: float, n_panels: int) -> None:
        edges = np.linspace(-length, length, n_panels + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        rad = 0.5 * (edges[1:] - edges[:-1])
        nodes = mid[:, None] + rad[:, None] * self._nodes_ref
        logd = self._log_density(nodes)
        self._shift = float(np.max(logd))  # conditioning for tiny temperatures
        dens = np.exp(logd - self._shift)
        masses = np.einsum("kj,j->k", dens, self._weights_ref) * rad
        self._edges = edges
        self._cum = np.concatenate(([0.0], np.cumsum(masses)))
        self._total = float(self._cum[-1])
        if not (self._total > 0 and np.isfinite(self._total)):
            raise ModelError("quadrature normalization failed")

    def _tails_below(self, length: float, tail_bound: float) -> bool:
        budget = tail_bound * self._total
        for x in (length, -length):
            g = float(self._model.gradient_checked(np.array([x]))[0])
            outward = g * math.copysign(1.0, x)
            if outward <= 0.0:
                return False
            log_tail = float(self._log_density(np.array([x]))[0]) - self._shift
            if math.exp(log_tail) / (self._beta * outward) >= budget:
                return False
        return True

    @property
    def lower(self) -> float:
        return float(self._edges[0])

    @property
    def upper(self) -> float:
        return float(self._edges[-1])

    def _partial(self, left: np.ndarray, x: np.ndarray) -> np.ndarray:
        mid = 0.5 * (left + x)
        rad = 0.5 * (x - left)
        nodes = mid[:, None] + rad[:, None] * self._nodes_ref
        dens = np.exp(self._log_density(nodes) - self._shift)
        return np.einsum("kj,j->k", dens, self._weights_ref) * rad

    def cdf(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        clipped = np.clip(x, self.lower, self.upper)
        idx = np.clip(np.searchsorted(self._edges, clipped, side="right") - 1,
                      0, self._edges.size - 2)
        left = self._edges[idx]
        value = (self._cum[idx] + self._partial(left, clipped)) / self._total
        return np.clip(value, 0.0, 1.0)

    def ppf(self, u) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if np.any((u < 0.0) | (u > 1.0)):
            raise ValueError("probabilities must lie in [0, 1]")
        target = u * self._total
        idx = np.clip(np.searchsorted(self._cum, target, side="right") - 1,
                      0, self._edges.size - 2)
        lo = self._edges[idx].copy()
        hi = self._edges[idx + 1].copy()
        base = self._cum[idx]
        left = self._edges[idx]
        for _ in range(60):  # panel width / 2^60 is far below any tolerance
            mid = 0.5 * (lo + hi)
            below = base + self._partial(left, mid) < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)

    def expectation(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        """E_pi[f(X)] by the same panel quadrature."""
        edges = self._edges
        mid = 0.5 * (edges[:-1] + edges[1:])
        rad = 0.5 * (edges[1:] - edges[:-1])
        nodes = mid[:, None] + rad[:, None] * self._nodes_ref
        dens = np.exp(self._log_density(nodes) - self._shift)
        vals = np.einsum("kj,kj,j->k", np.asarray(f(nodes), dtype=float), dens,
                         self._weights_ref) * rad
        return float(np.sum(vals) / self._total)


def equilibrium_sample_1d(model: PotentialModel, gen: np.random.Generator,
                          size: Optional[int] = None,
                          cdf: Optional[QuadratureCdf] = None):
    """Inverse-transform sample(s) from pi ~ exp(-beta U) via the numeric CDF."""
    quad = cdf if cdf is not None else QuadratureCdf(model)
    u = gen.uniform(size=size)
    x = quad.ppf(u)
    return float(x[0]) if size is None else x


def ks_distance(samples, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """Sup distance between the empirical CDF of samples and a target CDF."""
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    n = s.size
    if n == 0:
        raise ValueError("need at least one sample")
    f = np.asarray(cdf(s), dtype=float)
    i = np.arange(1, n + 1)
    return float(np.max(np.maximum(i / n - f, f - (i - 1) / n)))


# ---------------------------------------------------------------------------
# Strong-error study

@dataclass(frozen=True)
class ConvergenceStudyConfig:
    """Inputs of one strong-error study; see strong_error_study."""

    model: Union[PotentialModel, InertialModel]
    method: str
    horizon: float
    h_values: tuple[float, ...]
    h_fine: float
    n_realizations: int
    init: str = "fixed"  # "fixed" | "equilibrium"
    x0: Optional[object] = None  # vector, or PhaseState for inertial models
    initial_energy_bound: Optional[float] = None
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "h_values",
                           tuple(sorted((float(h) for h in self.h_values), reverse=True)))

    @property
    def fine_to_coarse_ratio(self) -> int:
        return round(max(self.h_values) / self.h_fine)


@dataclass(frozen=True)
class ConvergenceReport:
    """Per-step-size RMS strong errors and the fitted log-log slope."""

    h_values: tuple[float, ...]
    rms: tuple[float, ...]
    stderr: tuple[float, ...]
    slope: float
    half_width: float
    n_realizations: int
    discarded: int
    discard_reasons: tuple[str, ...]


def _validate_study(config: ConvergenceStudyConfig) -> bool:
    model = config.model
    is_inertial = isinstance(model, InertialModel)
    methods = INERTIAL_METHODS if is_inertial else OVERDAMPED_METHODS
    if config.method not in methods:
        family = "inertial" if is_inertial else "overdamped"
        raise ValueError(f"method {config.method!r} is not a {family} method")
    if not (config.horizon > 0 and config.h_fine > 0):
        raise ValueError("horizon and h_fine must be positive")
    if not config.h_values:
        raise ValueError("need at least one step size")
    if len(set(config.h_values)) != len(config.h_values):
        raise ValueError("step sizes must be distinct")
    for h in config.h_values:
        _integer_ratio(config.horizon, h, "horizon")
        _integer_ratio(h, config.h_fine, "step size")
    ratio = config.fine_to_coarse_ratio
    if ratio < 64 or ratio & (ratio - 1):
        raise ValueError("coarsest h must be a power-of-two multiple >= 64 of h_fine")
    if config.n_realizations < 2:
        raise ValueError("need at least two realizations")
    if config.init not in ("fixed", "equilibrium"):
        raise ValueError(f"unknown initial-condition policy {config.init!r}")
    if config.init == "fixed" and config.x0 is None:
        raise ValueError("fixed initial-condition policy requires x0")
    return is_inertial


def _equilibrium_positions(model: PotentialModel, n: int, master_seed: int,
                           energy_bound: Optional[float],
                           with_momentum: Optional[InertialModel] = None):
    """Per-realization equilibrium draws from the dedicated init streams."""
    quad = QuadratureCdf(model)
    if energy_bound is None and with_momentum is None:
        us = np.empty(n)
        for r in range(n):
            us[r] = stream_generator(RngStreamSpec(master_seed, r, "init")).uniform()
        return quad.ppf(us)[:, None]
    dim = model.dimension
    q0s = np.empty((n, dim))
    p0s = np.empty((n, dim))
    for r in range(n):
        gen = stream_generator(RngStreamSpec(master_seed, r, "init"))
        while True:
            x = quad.ppf(np.array([gen.uniform()]))
            if energy_bound is None or model.energy_checked(x) <= energy_bound:
                break
        q0s[r] = x
        if with_momentum is not None:
            p0s[r] = gen.standard_normal(dim) * np.sqrt(with_momentum.mass
                                                        / with_momentum.beta)
    return (q0s, p0s) if with_momentum is not None else q0s


def strong_error_study(config: ConvergenceStudyConfig, threads: int = 1) -> ConvergenceReport:
    """Measure terminal-time RMS strong errors and fit the convergence order.

    Per realization: one shared initial condition, one Brownian grid, one
    fine reference run, then the method at every h on coarsened windows
    of the same grid with an independent Metropolis stream per h.
    Realizations whose reference or method run trips the blow-up guard
    are discarded and counted; the study aborts if the discarded fraction
    reaches 1e-4 or any accumulator goes non-finite.
    """
    is_inertial = _validate_study(config)
    model = config.model
    base = model.base if is_inertial else model
    n = model.dimension
    R = config.n_realizations
    h_values = config.h_values
    seed = config.master_seed
    guard = 1e8

    if config.init == "equilibrium":
        if is_inertial:
            q0s, p0s = _equilibrium_positions(base, R, seed, config.initial_energy_bound,
                                              with_momentum=model)
        else:
            q0s = _equilibrium_positions(base, R, seed, config.initial_energy_bound)
            p0s = None
    else:
        if is_inertial:
            state0 = config.x0
            q0s = np.tile(_as_vector(state0.q, n), (R, 1))
            p0s = np.tile(_as_vector(state0.p, n), (R, 1))
        else:
            q0s = np.tile(_as_vector(config.x0, n), (R, 1))
            p0s = None

    grid_step = 0.5 * config.h_fine if is_inertial else config.h_fine
    sq_err = np.empty((R, len(h_values)))
    ok = np.zeros(R, dtype=bool)
    reasons = [""] * R

    def worker(r: int) -> None:
        grid = generate_brownian_grid(config.horizon, grid_step, n,
                                      RngStreamSpec(seed, r, "brownian"))
        try:
            if is_inertial:
                ref = reference_trajectory(model, grid,
                                           x0=PhaseState(q0s[r], p0s[r]),
                                           blowup_guard=guard)
            else:
                ref = reference_trajectory(model, grid, x0=q0s[r], blowup_guard=guard)
        except TrajectoryBlowup as exc:
            reasons[r] = f"reference blow-up at step {exc.step}"
            return
        for j, h in enumerate(h_values):
            n_steps = round(config.horizon / h)
            zgen = stream_generator(RngStreamSpec(seed, r, "metropolis-uniform"), salt=j)
            zetas = (np.empty(0) if config.method in ("ula", "gla")
                     else zgen.uniform(size=n_steps))
            try:
                if is_inertial:
                    xi1, xi2 = coarse_ou_integrals(grid, model, h)
                    term = _gla_terminal(model, PhaseState(q0s[r], p0s[r]), h,
                                         xi1, xi2, zetas, config.method, guard)
                    err = float(np.sum((term.q - ref.q) ** 2)
                                + np.sum((term.p - ref.p) ** 2))
                else:
                    dw = coarse_increments(grid, h)
                    term = _em_terminal(model, q0s[r], h, dw, zetas,
                                        config.method, guard)
                    err = float(np.sum((term - ref) ** 2))
            except TrajectoryBlowup as exc:
                reasons[r] = f"{config.method} blow-up at h={h:g}, step {exc.step}"
                return
            sq_err[r, j] = err
        ok[r] = True

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(worker, range(R)))
    else:
        for r in range(R):
            worker(r)

    discarded = int(R - np.count_nonzero(ok))
    discard_reasons = tuple(reason for reason in reasons if reason)
    if discarded and discarded / R >= 1e-4:
        raise StudyAbort(f"discarded {discarded} of {R} realizations: "
                         + "; ".join(discard_reasons[:5]))
    kept = sq_err[ok]
    mse = kept.mean(axis=0)
    if not np.all(np.isfinite(mse)):
        raise StudyAbort("non-finite error accumulator")
    rms = np.sqrt(mse)
    se_mse = kept.std(axis=0, ddof=1) / math.sqrt(kept.shape[0])
    stderr = se_mse / (2.0 * rms)  # delta method for sqrt of the mean square
    fit = fit_order(h_values, rms)
    return ConvergenceReport(h_values, tuple(rms), tuple(stderr), fit.slope,
                             fit.half_width, kept.shape[0], discarded, discard_reasons)


# ---------------------------------------------------------------------------
# Rejection-rate scaling

@dataclass(frozen=True)
class RejectionRateReport:
    h_values: tuple[float, ...]
    mean_rejection: tuple[float, ...]
    stderr: tuple[float, ...]
    slope: float
    half_width: float
    n_realizations: int
    n_steps: int


def rejection_rate_study(model: Union[PotentialModel, InertialModel], method: str,
                         h_values, n_steps: int, init: str = "equilibrium",
                         x0=None, n_realizations: int = 64, master_seed: int = 0,
                         threads: int = 1) -> RejectionRateReport:
    """Mean one-step rejection probability (1 - alpha) per step size.

    Chains start from per-realization equilibrium draws (or a fixed
    state) and average 1 - alpha over all steps and realizations; the
    log-log slope over h follows.  A slope of NaN is reported when any
    mean rejection is zero (flat potentials).
    """
    is_inertial = isinstance(model, InertialModel)
    methods = INERTIAL_METHODS if is_inertial else OVERDAMPED_METHODS
    if method not in methods or method in ("ula", "gla"):
        raise ValueError(f"rejection rates need an adjusted method, got {method!r}")
    h_values = tuple(sorted((float(h) for h in h_values), reverse=True))
    base = model.base if is_inertial else model
    n = model.dimension
    R = n_realizations

    if init == "equilibrium":
        if is_inertial:
            q0s, p0s = _equilibrium_positions(base, R, master_seed, None,
                                              with_momentum=model)
        else:
            q0s = _equilibrium_positions(base, R, master_seed, None)
    elif init == "fixed":
        if x0 is None:
            raise ValueError("fixed policy requires x0")
        if is_inertial:
            q0s = np.tile(_as_vector(x0.q, n), (R, 1))
            p0s = np.tile(_as_vector(x0.p, n), (R, 1))
        else:
            q0s = np.tile(_as_vector(x0, n), (R, 1))
    else:
        raise ValueError(f"unknown initial-condition policy {init!r}")

    per_real = np.empty((R, len(h_values)))

    def worker(r: int) -> None:
        for j, h in enumerate(h_values):
            bgen = stream_generator(RngStreamSpec(master_seed, r, "brownian"), salt=j)
            zgen = stream_generator(RngStreamSpec(master_seed, r, "metropolis-uniform"),
                                    salt=j)
            zetas = zgen.uniform(size=n_steps)
            if is_inertial:
                scale = np.sqrt(ou_variance(model, 0.5 * h))
                draws = bgen.standard_normal((n_steps, 2, n))
                trace = run_inertial_chain(
                    model, method, PhaseState(q0s[r], p0s[r]), h, n_steps,
                    master_seed, r,
                    ou_noise=(np.ascontiguousarray(draws[:, 0, :] * scale),
                              np.ascontiguousarray(draws[:, 1, :] * scale)),
                    uniforms=zetas)
            else:
                dw = bgen.standard_normal((n_steps, n)) * math.sqrt(h)
                trace = run_overdamped_chain(model, method, q0s[r], h, n_steps,
                                             master_seed, r, increments=dw,
                                             uniforms=zetas)
            if trace.blew_up:
                raise StudyAbort(f"{method} chain blew up at h={h:g}, "
                                 f"step {trace.blowup_step}")
            per_real[r, j] = float(np.mean(1.0 - trace.alphas))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(worker, range(R)))
    else:
        for r in range(R):
            worker(r)

    means = per_real.mean(axis=0)
    stderr = per_real.std(axis=0, ddof=1) / math.sqrt(R)
    if np.all(means > 0):
        fit = fit_order(h_values, means)
        slope, half_width = fit.slope, fit.half_width
    else:
        slope, half_width = math.nan, math.nan
    return RejectionRateReport(h_values, tuple(means), tuple(stderr),
                               slope, half_width, R, n_steps)


# ---------------------------------------------------------------------------
# Ergodicity diagnostics

@dataclass(frozen=True)
class ErgodicityReport:
    method: str
    h: float
    n_steps: int
    burn: int
    position_edges: np.ndarray
    position_counts: np.ndarray
    ks_position: float
    momentum_edges: Optional[np.ndarray] = None
    momentum_counts: Optional[np.ndarray] = None
    ks_momentum: Optional[float] = None


def ergodicity_study(model: Union[PotentialModel, InertialModel], method: str,
                     h: float, n_steps: int, state0, master_seed: int,
                     *, bins: int = 256, burn_fraction: float = 0.1,
                     blowup_guard: float = 1e8) -> ErgodicityReport:
    """One long chain against the quadrature CDF of its invariant density.

    The first burn_fraction of the post-step states is dropped; the rest
    feed a histogram on the quadrature domain and a Kolmogorov-Smirnov
    distance (position marginal; for inertial models also the Gaussian
    momentum marginal).  An unadjusted chain that trips the guard raises
    StudyAbort.
    """
    is_inertial = isinstance(model, InertialModel)
    base = model.base if is_inertial else model
    if base.dimension != 1:
        raise ValueError("ergodicity diagnostics are 1-D")
    burn = int(burn_fraction * n_steps)
    quad = QuadratureCdf(base)
    if is_inertial:
        trace = run_inertial_chain(model, method, state0, h, n_steps, master_seed,
                                   blowup_guard=blowup_guard)
        if trace.blew_up:
            raise StudyAbort(f"{method} chain exceeded the blow-up guard at step "
                             f"{trace.blowup_step}")
        q_samples = trace.qs[1 + burn:, 0]
        p_samples = trace.ps[1 + burn:, 0]
        sigma_p = math.sqrt(float(model.mass[0]) / model.beta)
        p_cdf = stats.norm(scale=sigma_p).cdf
        p_edges = np.linspace(-8.0 * sigma_p, 8.0 * sigma_p, bins + 1)
        q_edges = np.linspace(quad.lower, quad.upper, bins + 1)
        return ErgodicityReport(
            method, h, n_steps, burn,
            q_edges, np.histogram(q_samples, q_edges)[0],
            ks_distance(q_samples, quad.cdf),
            p_edges, np.histogram(p_samples, p_edges)[0],
            ks_distance(p_samples, p_cdf))
    trace = run_overdamped_chain(model, method, state0, h, n_steps, master_seed,
                                 blowup_guard=blowup_guard)
    if trace.blew_up:
        raise StudyAbort(f"{method} chain exceeded the blow-up guard at step "
                         f"{trace.blowup_step}")
    samples = trace.states[1 + burn:, 0]
    edges = np.linspace(quad.lower, quad.upper, bins + 1)
    return ErgodicityReport(method, h, n_steps, burn, edges,
                            np.histogram(samples, edges)[0],
                            ks_distance(samples, quad.cdf))


# ---------------------------------------------------------------------------
# Shared-path trajectories (single realization)

@dataclass(frozen=True)
class TrajectoryTable:
    """Reference and method values on a shared Brownian path, 1-D overdamped."""

    times: np.ndarray
    reference: np.ndarray
    methods: tuple[str, ...]
    values: tuple[np.ndarray, ...]
    accepted: tuple[Optional[np.ndarray], ...]
    blowup_steps: tuple[Optional[int], ...]


def trajectory_study(model: PotentialModel, methods, h: float, n_steps: int,
                     x0, master_seed: int, *, ratio: int = 64,
                     blowup_guard: float = 1e8) -> TrajectoryTable:
    """One realization of each method against the fine reference on one path."""
    if isinstance(model, InertialModel) or model.dimension != 1:
        raise ValueError("trajectory tables cover 1-D overdamped models")
    methods = tuple(methods)
    for m in methods:
        if m not in OVERDAMPED_METHODS:
            raise ValueError(f"unknown overdamped method {m!r}")
    if ratio < 1:
        raise ValueError("ratio must be >= 1")
    h_fine = h / ratio
    grid = generate_brownian_grid(h * n_steps, h_fine, 1,
                                  RngStreamSpec(master_seed, 0, "brownian"))
    ref_trace = run_overdamped_chain(model, "ula", x0, h_fine, n_steps * ratio,
                                     master_seed, blowup_guard=blowup_guard,
                                     increments=grid.increments)
    if ref_trace.blew_up:
        raise StudyAbort(f"reference trajectory blew up at fine step "
                         f"{ref_trace.blowup_step}")
    reference = ref_trace.states[::ratio, 0]

    dw = coarse_increments(grid, h)
    values = []
    accepted = []
    blowups = []
    for i, m in enumerate(methods):
        uniforms = None
        if m != "ula":
            gen = stream_generator(RngStreamSpec(master_seed, 0, "metropolis-uniform"),
                                   salt=i)
            uniforms = gen.uniform(size=n_steps)
        trace = run_overdamped_chain(model, m, x0, h, n_steps, master_seed,
                                     blowup_guard=blowup_guard, increments=dw,
                                     uniforms=uniforms)
        values.append(trace.states[:, 0])
        accepted.append(None if m == "ula" else trace.accepted)
        blowups.append(trace.blowup_step)
    times = np.arange(n_steps + 1) * h
    return TrajectoryTable(times, reference, methods, tuple(values),
                           tuple(accepted), tuple(blowups))
