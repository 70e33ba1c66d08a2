"""Potential models and shared state types for Langevin integrators.

The dynamics of interest are the overdamped SDE

    dY = -grad U(Y) dt + sqrt(2/beta) dW,    pi(x) ~ exp(-beta U(x)),

and its inertial counterpart on phase space (q, p) with friction gamma,
diagonal mass matrix M and invariant density ~ exp(-beta H(q, p)).
Every integrator, acceptance ratio and transition density downstream
consumes potentials through the types defined here.

Shipped potentials are separable polynomials, U(x) = sum_i P(x_i) with P
a one-variable polynomial; that family covers the quartic, quadratic and
zero potentials used by the experiments and is what the compiled chain
kernels understand.  Models built from black-box callables still work but
take the pure-Python chain path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Union

import numpy as np
from numpy.polynomial import polynomial as npoly


class ModelError(ValueError):
    """A potential evaluated to a non-finite value, or was built from bad inputs."""


class PhaseState(NamedTuple):
    """Position-momentum pair (q, p) of the inertial dynamics."""

    q: np.ndarray
    p: np.ndarray


class StepOutcome(NamedTuple):
    """Result of one adjusted step.

    state is the post-step state: the proposal if accepted, the pre-step
    state if rejected (overdamped), or the momentum-flipped pre-step state
    if rejected (inertial).
    """

    state: Union[np.ndarray, PhaseState]
    proposal: Union[np.ndarray, PhaseState]
    alpha: float
    accepted: bool


def _as_vector(x, dimension: int) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (dimension,):
        raise ModelError(f"expected a vector of length {dimension}, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class PotentialModel:
    """Potential U with inverse temperature beta on R^n.

    Attributes:
        dimension: number of configuration components n.
        beta: inverse temperature, > 0.
        kind: tag identifying the family ("quartic", "quadratic", "zero",
            "polynomial", or anything for custom callables).
        energy: x -> U(x), scalar; for the polynomial family it also maps
            a (..., n) batch to (...) energies.
        gradient: x -> grad U(x), shape-preserving.
        u_coeffs: ascending coefficients of the per-component polynomial
            when the model is separable-polynomial, else None (which
            routes chains through the pure-Python path).
    """

    dimension: int
    beta: float
    kind: str
    energy: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    u_coeffs: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.dimension < 1:
            raise ModelError("dimension must be a positive integer")
        if not (self.beta > 0):
            raise ModelError("beta must be positive")

    def energy_checked(self, x) -> float:
        """U(x) with the non-finite guard: model errors never propagate silently."""
        value = float(self.energy(_as_vector(x, self.dimension)))
        if not np.isfinite(value):
            raise ModelError(f"U evaluated to a non-finite value at x={x!r}")
        return value

    def gradient_checked(self, x) -> np.ndarray:
        g = np.asarray(self.gradient(_as_vector(x, self.dimension)), dtype=float)
        if not np.all(np.isfinite(g)):
            raise ModelError(f"grad U evaluated to a non-finite value at x={x!r}")
        return g


def make_polynomial_model(coeffs, beta: float, dimension: int = 1,
                          kind: str = "polynomial") -> PotentialModel:
    """Separable polynomial potential U(x) = sum_i P(x_i).

    coeffs are ascending: P(t) = c0 + c1 t + ... + ck t^k.
    """
    c = np.asarray(coeffs, dtype=float)
    if c.ndim != 1 or c.size == 0:
        raise ModelError("coeffs must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(c)):
        raise ModelError("coeffs must be finite")
    dc = npoly.polyder(c) if c.size > 1 else np.zeros(1)

    def energy(x):
        return np.sum(npoly.polyval(np.asarray(x, dtype=float), c), axis=-1)

    def gradient(x):
        x = np.asarray(x, dtype=float)
        return npoly.polyval(x, dc) * np.ones_like(x)

    return PotentialModel(dimension, float(beta), kind, energy, gradient,
                          u_coeffs=tuple(float(v) for v in c))


def make_quartic_model(beta: float) -> PotentialModel:
    """1-D quartic well U(x) = x^4 / 4, grad U(x) = x^3."""
    return make_polynomial_model((0.0, 0.0, 0.0, 0.0, 0.25), beta, 1, kind="quartic")


def make_quadratic_model(beta: float, dimension: int = 1) -> PotentialModel:
    """Harmonic potential U(x) = |x|^2 / 2 (per component x_i^2 / 2)."""
    return make_polynomial_model((0.0, 0.0, 0.5), beta, dimension, kind="quadratic")


def make_zero_model(beta: float, dimension: int = 1) -> PotentialModel:
    """Flat potential U = 0: pure diffusion, every Metropolis ratio is 1."""
    return make_polynomial_model((0.0,), beta, dimension, kind="zero")


@dataclass(frozen=True, eq=False)
class InertialModel:
    """Inertial Langevin model: base potential plus friction and diagonal mass.

    H(q, p) = 1/2 p^T M^{-1} p + U(q); the invariant density on phase
    space is proportional to exp(-beta H).
    """

    base: PotentialModel
    gamma: float
    mass: np.ndarray = field(default_factory=lambda: np.ones(1))

    def __post_init__(self):
        if not (self.gamma > 0):
            raise ModelError("gamma must be positive")
        mass = np.atleast_1d(np.asarray(self.mass, dtype=float)).copy()
        if mass.shape != (self.base.dimension,):
            raise ModelError("mass must have one positive entry per dimension")
        if not np.all(mass > 0):
            raise ModelError("mass entries must be positive")
        mass.setflags(write=False)
        object.__setattr__(self, "mass", mass)

    @property
    def dimension(self) -> int:
        return self.base.dimension

    @property
    def beta(self) -> float:
        return self.base.beta

    def hamiltonian(self, q, p) -> float:
        q = _as_vector(q, self.dimension)
        p = _as_vector(p, self.dimension)
        return 0.5 * float(p @ (p / self.mass)) + float(self.base.energy(q))


def polynomial_coefficients(model: PotentialModel) -> tuple[np.ndarray, np.ndarray]:
    """(U, grad U) ascending coefficient arrays of a polynomial-family model.

    This is the form the chain kernels consume; black-box models have no
    such representation and raise.
    """
    if model.u_coeffs is None:
        raise ModelError("model is not in the separable-polynomial family")
    u_c = np.asarray(model.u_coeffs, dtype=float)
    du_c = npoly.polyder(u_c) if u_c.size > 1 else np.zeros(1)
    return u_c, du_c


def finite_difference_gradient(model: PotentialModel, x, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of model.energy, the validation oracle."""
    if not (eps > 0):
        raise ModelError("eps must be positive")
    x = _as_vector(x, model.dimension)
    out = np.empty(model.dimension)
    for i in range(model.dimension):
        step = np.zeros(model.dimension)
        step[i] = eps
        out[i] = (model.energy_checked(x + step) - model.energy_checked(x - step)) / (2 * eps)
    return out
