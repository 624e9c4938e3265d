#    This file is part of mkvlab
#
#    mkvlab is free software: you can redistribute it and/or modify
#    it under the terms of the GNU General Public License as published by
#    the Free Software Foundation, either version 3 of the License, or
#    (at your option) any later version.
#
#    mkvlab is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU General Public License for more details.
#
#    You should have received a copy of the GNU General Public License
#    along with mkvlab.  If not, see <http://www.gnu.org/licenses/>.

"""Gaussian law flow of the distribution dependent Vasicek model.

With an affine drift, an x-free diffusion and moment-based functionals, a Gaussian (or Dirac)
initial law stays Gaussian and the flow is the moment system

    m' = gamma - beta m + b(m, v)
    v' = -2 beta v + sigma(m, v)^2

integrated with fixed-step RK4.
"""

from dataclasses import dataclass
import logging
import math
from typing import Callable, Iterator, Tuple

import numpy as np
from scipy import stats

from mkvlab.model_core import DomainError, InvalidParameter, LabError, VasicekParams, one_minus_exp_over

class VarianceCollapse(LabError):
    pass


class DegenerateGaussian(LabError):
    pass


class NotConverged(LabError):
    pass


@dataclass(frozen=True)
class GaussianState:
    mean : float
    variance : float

    def __post_init__(self):
        mean, variance = float(self.mean), float(self.variance)
        if not (math.isfinite(mean) and math.isfinite(variance)):
            raise InvalidParameter(f"Gaussian states must be finite, got ({mean}, {variance})")
        if variance < 0.0:
            raise InvalidParameter(f"Variance must be >= 0, got {variance}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", variance)

    @classmethod
    def dirac(cls, x: float) -> "GaussianState":
        return cls(x, 0.0)

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)


@dataclass(frozen=True)
class FlowTrajectory:
    times : Tuple[float, ...]
    states : Tuple[GaussianState, ...]
    b_values : Tuple[float, ...]
    sigma_values : Tuple[float, ...]

    @property
    def final(self) -> GaussianState:
        return self.states[-1]

    def rows(self) -> Iterator[Tuple[float, float, float, float, float]]:
        for t, g, b, s in zip(self.times, self.states, self.b_values, self.sigma_values):
            yield t, g.mean, g.variance, b, s


def _moment_rhs(params: VasicekParams, m: float, v: float) -> Tuple[float, float]:
    v = max(v, 0.0)
    s2 = params.sigma_squared(m, v)
    b = float(params.b_fn(m, v))
    return params.gamma_drift - params.beta * m + b, -2.0 * params.beta * v + s2

def evolve(params: VasicekParams, init: GaussianState, horizon: float, dt: float,
           tolerance: float = 1e-10) -> FlowTrajectory:
    if horizon < 0.0:
        raise DomainError(f"The horizon must be >= 0, got {horizon}")
    if not dt > 0.0:
        raise InvalidParameter(f"dt must be > 0, got {dt}")

    steps = math.ceil(horizon / dt - 1e-9) if horizon > 0.0 else 0
    h = horizon / steps if steps else 0.0
    logging.debug(f"Evolving Gaussian flow from {init} over {steps} RK4 step(s) of {h!r}")

    m, v = init.mean, init.variance
    params.sigma_squared(m, v)
    times, states = [0.0], [init]
    b_values, sigma_values = [float(params.b_fn(m, v))], [float(params.sigma_fn(m, v))]
    for k in range(1, steps + 1):
        k1 = _moment_rhs(params, m, v)
        k2 = _moment_rhs(params, m + 0.5 * h * k1[0], v + 0.5 * h * k1[1])
        k3 = _moment_rhs(params, m + 0.5 * h * k2[0], v + 0.5 * h * k2[1])
        k4 = _moment_rhs(params, m + h * k3[0], v + h * k3[1])
        m += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        v += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        if v < -tolerance or not (math.isfinite(m) and math.isfinite(v)):
            raise VarianceCollapse(f"Variance {v!r} at t={k * h!r} (mean {m!r})")
        v = max(v, 0.0)
        params.sigma_squared(m, v)

        times.append(k * h)
        states.append(GaussianState(m, v))
        b_values.append(float(params.b_fn(m, v)))
        sigma_values.append(float(params.sigma_fn(m, v)))
    return FlowTrajectory(tuple(times), tuple(states), tuple(b_values), tuple(sigma_values))

def step_halving_error(params: VasicekParams, init: GaussianState, horizon: float, dt: float) -> float:
    """Largest final-state moment difference between step sizes dt and dt/2."""
    coarse = evolve(params, init, horizon, dt).final
    fine = evolve(params, init, horizon, dt / 2.0).final
    return max(abs(coarse.mean - fine.mean), abs(coarse.variance - fine.variance))

def variance_band(params: VasicekParams, t: float) -> Tuple[float, float]:
    """Bounds K^-1 f(t) <= v_t <= K f(t), f(t) = (1 - e^{-2 beta t}) / (2 beta), for Dirac starts."""
    f = one_minus_exp_over(2.0 * params.beta, t)
    return f / params.k_bound, f * params.k_bound

def stationary_state(params: VasicekParams, tolerance: float = 1e-12, damping: float = 0.5,
                     max_iterations: int = 100000) -> GaussianState:
    """Fixed point of the moment system by damped iteration."""
    if not params.beta > 0.0:
        raise DomainError(f"No stationary Gaussian state unless beta > 0, got {params.beta}")

    beta = params.beta
    m = params.gamma_drift / beta
    v = 1.0 / (2.0 * beta)
    for i in range(max_iterations):
        b = float(params.b_fn(m, v))
        s2 = params.sigma_squared(m, v)
        m_next = (1.0 - damping) * m + damping * (params.gamma_drift + b) / beta
        v_next = (1.0 - damping) * v + damping * s2 / (2.0 * beta)
        change = max(abs(m_next - m), abs(v_next - v))
        m, v = m_next, v_next
        if not (math.isfinite(m) and math.isfinite(v)):
            break
        if change <= tolerance * max(1.0, abs(m), v):
            logging.debug(f"Stationary state ({m!r}, {v!r}) after {i + 1} iterations")
            return GaussianState(m, v)
    raise NotConverged(f"Stationary iteration did not settle within {max_iterations} iterations (last {m!r}, {v!r})")

def density(g: GaussianState, z):
    if g.variance == 0.0:
        raise DegenerateGaussian("A Dirac state has no density")
    value = stats.norm.pdf(z, loc=g.mean, scale=g.std)
    return float(value) if np.ndim(value) == 0 else value

def entropy_gaussians(p: GaussianState, q: GaussianState) -> float:
    """Ent(p|q) in closed form."""
    if p.variance == 0.0 or q.variance == 0.0:
        raise DegenerateGaussian("Relative entropy needs positive variances")
    return (0.5 * math.log(q.variance / p.variance)
            + (p.variance - q.variance) / (2.0 * q.variance)
            + (p.mean - q.mean) ** 2 / (2.0 * q.variance))

def w2_gaussians(p: GaussianState, q: GaussianState) -> float:
    return math.hypot(p.mean - q.mean, p.std - q.std)

def expectation(g: GaussianState, fn: Callable[[np.ndarray], np.ndarray], order: int = 64) -> float:
    """E fn(X) for X ~ g by Gauss-Hermite quadrature; exact for Diracs."""
    if g.variance == 0.0:
        return float(fn(np.array([g.mean]))[0])
    nodes, weights = np.polynomial.hermite_e.hermegauss(order)
    values = fn(g.mean + g.std * nodes)
    return float(np.dot(weights, values) / math.sqrt(2.0 * math.pi))
