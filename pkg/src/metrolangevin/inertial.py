"""Inertial Langevin: exact OU flow, variational integrators, GLA, MAGLA.

One GLA step is the Strang composition psi_{h/2} o theta_h o psi_{h/2},
where psi_t is the exact Ornstein-Uhlenbeck momentum flow

    p -> exp(-gamma t / m) p + xi,   Var xi_i = (1/beta)(1 - e^{-2 gamma t / m_i}) m_i,

and theta_h is one symplectic step of the Hamiltonian part.  theta_h is
expressed through a discrete Lagrangian L_d(q0, q1, h) and its discrete
Euler-Lagrange equations p0 = -D1 L_d, p1 = D2 L_d; only the explicit
Stormer-Verlet instance ships, but the transition density is written
against the abstraction because it holds for implicit integrators too.

MAGLA filters GLA proposals through the modified detailed-balance
acceptance; for a self-adjoint L_d the ratio collapses to
1 ^ exp(-beta DeltaE) with DeltaE the discrete energy change, and a
rejected move flips the momentum sign.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .models import (InertialModel, PhaseState, StepOutcome, _as_vector,
                     polynomial_coefficients)
from .rng import RngStreamSpec, stream_generator

METHOD_IDS = {"gla": 0, "magla": 1}

# OuNoise values are plain vectors: one Gaussian draw with per-component
# variance (1/beta)(1 - exp(-2 gamma t / m_i)) m_i for the flow duration t.
OuNoise = np.ndarray


def _check_h(h: float) -> float:
    if not (h > 0):
        raise ValueError("h must be positive")
    return float(h)


@dataclass(frozen=True)
class DiscreteLagrangian:
    """Partial-derivative maps of a discrete Lagrangian L_d(q0, q1, h).

    d1 and d2 return D1 L_d and D2 L_d; log_det_d12 returns
    log |det D12 L_d|, the Jacobian factor of the induced transition
    density.  self_adjoint marks L_d(q0, q1, h) = L_d(q1, q0, h) symmetry,
    the hypothesis under which the MAGLA acceptance reduces to an energy
    difference.
    """

    d1: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    d2: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    log_det_d12: Callable[[np.ndarray, np.ndarray, float], float]
    self_adjoint: bool


def verlet_lagrangian(model: InertialModel) -> DiscreteLagrangian:
    """The Stormer-Verlet (trapezoidal) discrete Lagrangian of the model.

    L_d = (q1-q0)^T M (q1-q0) / (2h) - (h/2)(U(q0) + U(q1)), which is
    self-adjoint, with constant |det D12 L_d| = prod(m_i) / h^n.
    """
    mass = model.mass
    grad = model.base.gradient_checked

    def d1(q0, q1, h):
        h = _check_h(h)
        return -mass * (q1 - q0) / h - 0.5 * h * grad(q0)

    def d2(q0, q1, h):
        h = _check_h(h)
        return mass * (q1 - q0) / h - 0.5 * h * grad(q1)

    def log_det_d12(q0, q1, h):
        h = _check_h(h)
        return float(np.sum(np.log(mass)) - model.dimension * np.log(h))

    return DiscreteLagrangian(d1, d2, log_det_d12, self_adjoint=True)


def verlet_map(model: InertialModel, q, p, h: float) -> tuple[np.ndarray, np.ndarray]:
    """One kick-drift-kick Verlet step; solves the DEL equations explicitly."""
    h = _check_h(h)
    q = _as_vector(q, model.dimension)
    p = _as_vector(p, model.dimension)
    minv = 1.0 / model.mass
    g = model.base.gradient_checked(q)
    q1 = q + h * minv * p - 0.5 * h * h * minv * g
    p1 = p - 0.5 * h * (g + model.base.gradient_checked(q1))
    return q1, p1


def ou_decay(model: InertialModel, duration: float) -> np.ndarray:
    """Per-component decay exp(-gamma t / m_i) of the OU flow over time t."""
    if not (duration > 0):
        raise ValueError("duration must be positive")
    return np.exp(-model.gamma * duration / model.mass)


def ou_variance(model: InertialModel, duration: float) -> np.ndarray:
    """Per-component variance Sigma_t = (1 - exp(-2 gamma t / m_i)) m_i / beta."""
    if not (duration > 0):
        raise ValueError("duration must be positive")
    return (1.0 - np.exp(-2.0 * model.gamma * duration / model.mass)) * model.mass / model.beta


def draw_ou_noise(model: InertialModel, duration: float, gen: np.random.Generator) -> OuNoise:
    return gen.standard_normal(model.dimension) * np.sqrt(ou_variance(model, duration))


def ou_half_step(model: InertialModel, p, h: float, xi: OuNoise) -> np.ndarray:
    """Exact OU momentum flow over h/2: exp(-gamma h / 2m) p + xi."""
    h = _check_h(h)
    p = _as_vector(p, model.dimension)
    xi = _as_vector(xi, model.dimension)
    return ou_decay(model, 0.5 * h) * p + xi


def ou_log_density(model: InertialModel, p0, p1, duration: float) -> float:
    """Log transition density of the OU flow from p0 to p1 over the duration.

    Gaussian with mean exp(-gamma t / m) p0 and variance Sigma_t; the
    normalization carries the square root of det Sigma_t, pinned by the
    integrate-to-one quadrature check.
    """
    p0 = _as_vector(p0, model.dimension)
    p1 = _as_vector(p1, model.dimension)
    var = ou_variance(model, duration)
    dev = p1 - ou_decay(model, duration) * p0
    return float(-0.5 * model.dimension * np.log(2.0 * np.pi)
                 - 0.5 * np.sum(np.log(var)) - 0.5 * np.sum(dev * dev / var))


def gla_step(model: InertialModel, state: PhaseState, h: float,
             xi1: OuNoise, xi2: OuNoise) -> PhaseState:
    """psi_{h/2} o theta_h o psi_{h/2} with the Verlet Hamiltonian step."""
    p_half = ou_half_step(model, state.p, h, xi1)
    q1, p_kick = verlet_map(model, state.q, p_half, h)
    return PhaseState(q1, ou_half_step(model, p_kick, h, xi2))


def gla_log_density(model: InertialModel, lagrangian: DiscreteLagrangian,
                    from_state: PhaseState, to_state: PhaseState, h: float) -> float:
    """Log transition density of one GLA step between phase points.

    Composes the Jacobian factor |det D12 L_d| with the two OU half-flow
    densities routed through the DEL momenta: p0 -> -D1 L_d and
    D2 L_d -> p1.
    """
    h = _check_h(h)
    q0, p0 = from_state
    q1, p1 = to_state
    return (lagrangian.log_det_d12(q0, q1, h)
            + ou_log_density(model, p0, -lagrangian.d1(q0, q1, h), 0.5 * h)
            + ou_log_density(model, lagrangian.d2(q0, q1, h), p1, 0.5 * h))


def delta_e(model: InertialModel, lagrangian: DiscreteLagrangian,
            q0, q1, h: float) -> float:
    """Discrete energy change along the DEL move q0 -> q1.

    DeltaE = E(q1, D2 L_d) - E(q0, -D1 L_d) with E(q, p) = p^T M^{-1} p / 2 + U(q).
    """
    h = _check_h(h)
    q0 = _as_vector(q0, model.dimension)
    q1 = _as_vector(q1, model.dimension)
    d1 = lagrangian.d1(q0, q1, h)
    d2 = lagrangian.d2(q0, q1, h)
    minv = 1.0 / model.mass
    return (0.5 * float((minv * d2) @ d2) + model.base.energy_checked(q1)
            - 0.5 * float((minv * d1) @ d1) - model.base.energy_checked(q0))


def verlet_delta_e(model: InertialModel, q0, q1, h: float) -> float:
    """Closed-form reduction of delta_e for the Verlet discrete Lagrangian.

    Substituting the Verlet D1/D2 cancels the (q1-q0)^2/h^2 terms:
    DeltaE = U(q1) - U(q0) - <gU1 + gU0, q1 - q0>/2
             + (h^2/8)(gU1^T M^{-1} gU1 - gU0^T M^{-1} gU0).
    """
    h = _check_h(h)
    q0 = _as_vector(q0, model.dimension)
    q1 = _as_vector(q1, model.dimension)
    g0 = model.base.gradient_checked(q0)
    g1 = model.base.gradient_checked(q1)
    minv = 1.0 / model.mass
    return (model.base.energy_checked(q1) - model.base.energy_checked(q0)
            - 0.5 * float((g1 + g0) @ (q1 - q0))
            + h * h / 8.0 * (float((minv * g1) @ g1) - float((minv * g0) @ g0)))


def _alpha_from_log(log_alpha: float) -> float:
    return float(np.exp(min(log_alpha, 0.0)))


def magla_acceptance(model: InertialModel, lagrangian: DiscreteLagrangian,
                     from_state: PhaseState, to_state: PhaseState, h: float) -> float:
    """Acceptance probability 1 ^ exp(-beta DeltaE(q0, q1)).

    Valid only for self-adjoint discrete Lagrangians, where the
    momentum-flipped density ratio collapses to the energy form; anything
    else is refused rather than silently approximated.
    """
    if not lagrangian.self_adjoint:
        raise ValueError("MAGLA acceptance requires a self-adjoint discrete Lagrangian")
    de = delta_e(model, lagrangian, from_state.q, to_state.q, h)
    return _alpha_from_log(-model.beta * de)


def magla_step(model: InertialModel, state: PhaseState, h: float,
               xi1: OuNoise, xi2: OuNoise, zeta: float) -> StepOutcome:
    """Propose with GLA, accept iff zeta < alpha; rejection flips the momentum."""
    state = PhaseState(_as_vector(state.q, model.dimension),
                       _as_vector(state.p, model.dimension))
    proposal = gla_step(model, state, h, xi1, xi2)
    alpha = magla_acceptance(model, verlet_lagrangian(model), state, proposal, h)
    accepted = zeta < alpha
    new_state = proposal if accepted else PhaseState(state.q, -state.p)
    return StepOutcome(new_state, proposal, alpha, bool(accepted))


@dataclass(frozen=True)
class InertialChainTrace:
    """Column-store trace of a GLA/MAGLA chain; layout mirrors ChainTrace."""

    qs: np.ndarray
    ps: np.ndarray
    q_proposals: np.ndarray
    p_proposals: np.ndarray
    alphas: np.ndarray
    accepted: np.ndarray
    blowup_step: Optional[int] = None

    def __len__(self) -> int:
        return self.q_proposals.shape[0]

    @property
    def blew_up(self) -> bool:
        return self.blowup_step is not None

    def outcome(self, k: int) -> StepOutcome:
        return StepOutcome(PhaseState(self.qs[k + 1], self.ps[k + 1]),
                           PhaseState(self.q_proposals[k], self.p_proposals[k]),
                           float(self.alphas[k]), bool(self.accepted[k]))


def run_inertial_chain(model: InertialModel, method: str, state0: PhaseState,
                       h: float, n_steps: int, master_seed: int, stream_index: int = 0,
                       *, blowup_guard: float = 1e8, zero_noise: bool = False,
                       ou_noise: Optional[tuple[np.ndarray, np.ndarray]] = None,
                       uniforms: Optional[np.ndarray] = None,
                       metropolis_salt: int = 0) -> InertialChainTrace:
    """Run a GLA/MAGLA chain for n_steps.

    OU noises are drawn exactly (two independent half-step draws per
    step) unless ou_noise supplies the (n_steps, n) xi1/xi2 arrays, as
    the path-coupled convergence harness does.  Other arguments follow
    run_overdamped_chain.
    """
    if method not in METHOD_IDS:
        raise ValueError(f"unknown inertial method {method!r}")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    h = _check_h(h)
    q0 = _as_vector(state0.q, model.dimension)
    p0 = _as_vector(state0.p, model.dimension)
    n = model.dimension

    if ou_noise is not None:
        xi1 = np.ascontiguousarray(ou_noise[0], dtype=float)
        xi2 = np.ascontiguousarray(ou_noise[1], dtype=float)
        if xi1.shape != (n_steps, n) or xi2.shape != (n_steps, n):
            raise ValueError(f"ou_noise arrays must have shape {(n_steps, n)}")
    elif zero_noise:
        xi1 = np.zeros((n_steps, n))
        xi2 = np.zeros((n_steps, n))
    else:
        gen = stream_generator(RngStreamSpec(master_seed, stream_index, "brownian"))
        scale = np.sqrt(ou_variance(model, 0.5 * h))
        draws = gen.standard_normal((n_steps, 2, n))
        xi1 = np.ascontiguousarray(draws[:, 0, :] * scale)
        xi2 = np.ascontiguousarray(draws[:, 1, :] * scale)

    if method == "gla":
        zetas = np.empty(0)
    elif uniforms is not None:
        zetas = np.ascontiguousarray(uniforms, dtype=float)
        if zetas.shape != (n_steps,):
            raise ValueError(f"uniforms must have shape {(n_steps,)}")
    else:
        gen = stream_generator(RngStreamSpec(master_seed, stream_index, "metropolis-uniform"),
                               salt=metropolis_salt)
        zetas = gen.uniform(size=n_steps)

    qs = np.empty((n_steps + 1, n))
    ps = np.empty((n_steps + 1, n))
    q_props = np.empty((n_steps, n))
    p_props = np.empty((n_steps, n))
    alphas = np.empty(n_steps)
    accepted = np.zeros(n_steps, dtype=np.uint8)

    if model.base.u_coeffs is not None:
        u_c, du_c = polynomial_coefficients(model.base)
        blow = _kernels.inertial_chain(METHOD_IDS[method], u_c, du_c, model.beta, h,
                                       blowup_guard, 1.0 / model.mass,
                                       ou_decay(model, 0.5 * h), q0, p0,
                                       xi1, xi2, zetas,
                                       qs, ps, q_props, p_props, alphas, accepted)
    else:
        blow = _generic_inertial_chain(model, method, q0, p0, h, blowup_guard,
                                       xi1, xi2, zetas,
                                       qs, ps, q_props, p_props, alphas, accepted)

    if blow == 0:
        return InertialChainTrace(qs, ps, q_props, p_props, alphas,
                                  accepted.astype(bool), None)
    return InertialChainTrace(qs[:blow + 1], ps[:blow + 1], q_props[:blow],
                              p_props[:blow], alphas[:blow],
                              accepted[:blow].astype(bool), blow)


def _generic_inertial_chain(model, method, q0, p0, h, guard, xi1, xi2, zetas,
                            qs, ps, q_props, p_props, alphas, accepted) -> int:
    state = PhaseState(q0.copy(), p0.copy())
    qs[0], ps[0] = state.q, state.p
    for k in range(xi1.shape[0]):
        if method == "gla":
            proposal = gla_step(model, state, h, xi1[k], xi2[k])
            out = StepOutcome(proposal, proposal, 1.0, True)
        else:
            out = magla_step(model, state, h, xi1[k], xi2[k], zetas[k])
        state = out.state
        qs[k + 1], ps[k + 1] = state.q, state.p
        q_props[k], p_props[k] = out.proposal.q, out.proposal.p
        alphas[k] = out.alpha
        accepted[k] = out.accepted
        if not (max(np.max(np.abs(state.q)), np.max(np.abs(state.p))) <= guard):
            return k + 1
    return 0
