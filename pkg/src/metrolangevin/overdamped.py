"""Overdamped Langevin chains: ULA proposals with MALA/MALTA adjustment.

The unadjusted chain is the Euler-Maruyama step

    x' = x - h grad U(x) + sqrt(2/beta) dW,    dW ~ N(0, h I),

which is transient for superlinear drifts.  MALA filters those proposals
through a Metropolis-Hastings accept/reject step; its ratio reduces
exactly to exp(-beta G(x, y)) with

    G(x, y) = U(y) - U(x) - <grad U(y) + grad U(x), y - x>/2
              + (h/4) (|grad U(y)|^2 - |grad U(x)|^2),

an algebraic identity this module exposes and cross-checks against the
explicit transition densities.  MALTA truncates the proposal drift to
unit step-scaled magnitude; the G reduction is wrong once truncation
activates, so MALTA's acceptance always evaluates the truncated-proposal
densities directly.  Everything is computed in log space: linear-space
ratios underflow for distant proposals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import _kernels
from .models import PotentialModel, StepOutcome, _as_vector, polynomial_coefficients
from .rng import RngStreamSpec, stream_generator

METHOD_IDS = {"ula": 0, "mala": 1, "malta": 2}


class OverdampedStepInput(NamedTuple):
    """Inputs of one overdamped step; randomness is supplied, never drawn."""

    state: np.ndarray
    h: float
    dw: np.ndarray
    zeta: Optional[float] = None


def _check_h(h: float) -> float:
    if not (h > 0):
        raise ValueError("h must be positive")
    return float(h)


def ula_step(model: PotentialModel, inp: OverdampedStepInput) -> np.ndarray:
    """One Euler-Maruyama step x - h grad U(x) + sqrt(2/beta) dW."""
    x = _as_vector(inp.state, model.dimension)
    dw = _as_vector(inp.dw, model.dimension)
    h = _check_h(inp.h)
    g = model.gradient_checked(x)
    return x - h * g + np.sqrt(2.0 / model.beta) * dw


def ula_log_density(model: PotentialModel, x, y, h: float) -> float:
    """Log transition density of the ULA step from x to y."""
    h = _check_h(h)
    x = _as_vector(x, model.dimension)
    y = _as_vector(y, model.dimension)
    mean_dev = y - x + h * model.gradient_checked(x)
    var = 2.0 * h / model.beta  # per-component variance of the proposal
    n = model.dimension
    return -0.5 * n * np.log(2.0 * np.pi * var) - float(mean_dev @ mean_dev) / (2.0 * var)


def mala_log_ratio_g(model: PotentialModel, x, y, h: float) -> float:
    """G(x, y) such that the MALA Metropolis ratio equals exp(-beta G(x, y))."""
    h = _check_h(h)
    x = _as_vector(x, model.dimension)
    y = _as_vector(y, model.dimension)
    gx = model.gradient_checked(x)
    gy = model.gradient_checked(y)
    return (model.energy_checked(y) - model.energy_checked(x)
            - 0.5 * float((gy + gx) @ (y - x))
            + 0.25 * h * (float(gy @ gy) - float(gx @ gx)))


def _alpha_from_log(log_alpha: float) -> float:
    return float(np.exp(min(log_alpha, 0.0)))


def mala_acceptance(model: PotentialModel, x, y, h: float) -> float:
    """Acceptance probability 1 ^ exp(-beta G(x, y)) of the proposal y from x."""
    return _alpha_from_log(-model.beta * mala_log_ratio_g(model, x, y, h))


def mala_step(model: PotentialModel, inp: OverdampedStepInput) -> StepOutcome:
    """Propose with ULA, accept iff zeta < alpha; rejection keeps the state."""
    if inp.zeta is None:
        raise ValueError("mala_step needs a Metropolis uniform zeta")
    x = _as_vector(inp.state, model.dimension)
    y = ula_step(model, inp)
    alpha = mala_acceptance(model, x, y, inp.h)
    accepted = inp.zeta < alpha
    return StepOutcome(y if accepted else x, y, alpha, bool(accepted))


def malta_drift_term(model: PotentialModel, x, h: float) -> np.ndarray:
    """Truncated drift h grad U(x) / (1 v h |grad U(x)|); norm never exceeds 1."""
    h = _check_h(h)
    x = _as_vector(x, model.dimension)
    g = model.gradient_checked(x)
    return h * g / max(1.0, h * float(np.sqrt(g @ g)))


def malta_log_density(model: PotentialModel, x, y, h: float) -> float:
    """Log density of the truncated-drift proposal: ULA variance, shifted mean."""
    h = _check_h(h)
    x = _as_vector(x, model.dimension)
    y = _as_vector(y, model.dimension)
    mean_dev = y - x + malta_drift_term(model, x, h)
    var = 2.0 * h / model.beta
    n = model.dimension
    return -0.5 * n * np.log(2.0 * np.pi * var) - float(mean_dev @ mean_dev) / (2.0 * var)


def malta_acceptance(model: PotentialModel, x, y, h: float) -> float:
    """Full Metropolis-Hastings ratio with the truncated-proposal densities.

    No G-style shortcut exists once the truncation is active, so both
    directed densities are evaluated explicitly (normalizations cancel).
    """
    x = _as_vector(x, model.dimension)
    y = _as_vector(y, model.dimension)
    log_ratio = (-model.beta * (model.energy_checked(y) - model.energy_checked(x))
                 + malta_log_density(model, y, x, h)
                 - malta_log_density(model, x, y, h))
    return _alpha_from_log(log_ratio)


def malta_step(model: PotentialModel, inp: OverdampedStepInput) -> StepOutcome:
    if inp.zeta is None:
        raise ValueError("malta_step needs a Metropolis uniform zeta")
    x = _as_vector(inp.state, model.dimension)
    dw = _as_vector(inp.dw, model.dimension)
    y = x - malta_drift_term(model, x, inp.h) + np.sqrt(2.0 / model.beta) * dw
    alpha = malta_acceptance(model, x, y, inp.h)
    accepted = inp.zeta < alpha
    return StepOutcome(y if accepted else x, y, alpha, bool(accepted))


def in_instability_region(x: float, h: float) -> bool:
    """Whether the 1-D quartic zero-noise ULA map expands at x: |1 - h x^2| > 1."""
    return abs(1.0 - _check_h(h) * float(x) ** 2) > 1.0


@dataclass(frozen=True)
class ChainTrace:
    """Column-store trace of an overdamped chain.

    states has one more row than the step arrays (row 0 is the initial
    state).  A trace that tripped the blow-up guard is truncated at the
    offending step and carries its index in blowup_step; the tripped
    state is retained as evidence.
    """

    states: np.ndarray
    proposals: np.ndarray
    alphas: np.ndarray
    accepted: np.ndarray
    blowup_step: Optional[int] = None

    def __len__(self) -> int:
        return self.proposals.shape[0]

    @property
    def blew_up(self) -> bool:
        return self.blowup_step is not None

    def outcome(self, k: int) -> StepOutcome:
        return StepOutcome(self.states[k + 1], self.proposals[k],
                           float(self.alphas[k]), bool(self.accepted[k]))


def _truncate(blow: int, states, proposals, alphas, accepted) -> ChainTrace:
    if blow == 0:
        return ChainTrace(states, proposals, alphas, accepted.astype(bool), None)
    return ChainTrace(states[:blow + 1], proposals[:blow], alphas[:blow],
                      accepted[:blow].astype(bool), blow)


def run_overdamped_chain(model: PotentialModel, method: str, x0, h: float,
                         n_steps: int, master_seed: int, stream_index: int = 0,
                         *, blowup_guard: float = 1e8, zero_noise: bool = False,
                         increments: Optional[np.ndarray] = None,
                         uniforms: Optional[np.ndarray] = None,
                         metropolis_salt: int = 0) -> ChainTrace:
    """Run a ULA/MALA/MALTA chain for n_steps.

    Randomness comes from the (master_seed, stream_index) Brownian and
    Metropolis substreams unless increments/uniforms are supplied (as in
    path-coupled experiments) or zero_noise suppresses the diffusion.

    Args:
        model: potential with inverse temperature.
        method: "ula", "mala" or "malta".
        x0: initial state, length model.dimension.
        h: step size.
        n_steps: number of steps, >= 1.
        master_seed: seed of the stream family.
        stream_index: realization index within the family.
        blowup_guard: |x| threshold that terminates the trace with a marker.
        zero_noise: replace all Brownian increments by zero.
        increments: optional (n_steps, n) Brownian increments, variance h each.
        uniforms: optional (n_steps,) Metropolis uniforms.
        metropolis_salt: substream salt for the Metropolis coins.

    Returns:
        ChainTrace, truncated at the blow-up step if the guard tripped.
    """
    if method not in METHOD_IDS:
        raise ValueError(f"unknown overdamped method {method!r}")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    h = _check_h(h)
    x0 = _as_vector(x0, model.dimension)
    n = model.dimension

    if increments is not None:
        dw = np.ascontiguousarray(increments, dtype=float)
        if dw.shape != (n_steps, n):
            raise ValueError(f"increments must have shape {(n_steps, n)}")
    elif zero_noise:
        dw = np.zeros((n_steps, n))
    else:
        gen = stream_generator(RngStreamSpec(master_seed, stream_index, "brownian"))
        dw = gen.standard_normal((n_steps, n)) * np.sqrt(h)

    if method == "ula":
        zetas = np.empty(0)
    elif uniforms is not None:
        zetas = np.ascontiguousarray(uniforms, dtype=float)
        if zetas.shape != (n_steps,):
            raise ValueError(f"uniforms must have shape {(n_steps,)}")
    else:
        gen = stream_generator(RngStreamSpec(master_seed, stream_index, "metropolis-uniform"),
                               salt=metropolis_salt)
        zetas = gen.uniform(size=n_steps)

    states = np.empty((n_steps + 1, n))
    proposals = np.empty((n_steps, n))
    alphas = np.empty(n_steps)
    accepted = np.zeros(n_steps, dtype=np.uint8)

    if model.u_coeffs is not None:
        u_c, du_c = polynomial_coefficients(model)
        blow = _kernels.overdamped_chain(METHOD_IDS[method], u_c, du_c, model.beta,
                                         h, blowup_guard, x0, dw, zetas,
                                         states, proposals, alphas, accepted)
    else:
        blow = _generic_overdamped_chain(model, method, x0, h, blowup_guard, dw, zetas,
                                         states, proposals, alphas, accepted)
    return _truncate(blow, states, proposals, alphas, accepted)


def _generic_overdamped_chain(model, method, x0, h, guard, dw, zetas,
                              states, proposals, alphas, accepted) -> int:
    """Black-box-potential path: steps through the public single-step ops."""
    x = x0.copy()
    states[0] = x
    for k in range(dw.shape[0]):
        if method == "ula":
            y = ula_step(model, OverdampedStepInput(x, h, dw[k]))
            out = StepOutcome(y, y, 1.0, True)
        elif method == "mala":
            out = mala_step(model, OverdampedStepInput(x, h, dw[k], zetas[k]))
        else:
            out = malta_step(model, OverdampedStepInput(x, h, dw[k], zetas[k]))
        x = np.asarray(out.state, dtype=float)
        states[k + 1] = x
        proposals[k] = out.proposal
        alphas[k] = out.alpha
        accepted[k] = out.accepted
        if not (np.max(np.abs(x)) <= guard):
            return k + 1
    return 0
