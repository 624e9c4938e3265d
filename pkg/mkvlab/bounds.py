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

"""Closed-form constants of the log-Harnack, inverse-moment and contraction estimates."""

from dataclasses import dataclass, field, replace
import logging
import math
from typing import Any, Callable, Dict, NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy import optimize

from mkvlab.constants import *
from mkvlab.model_core import CklsParams, DomainError, LabError, VasicekParams, one_minus_exp_over

class HypothesisViolated(LabError):
    pass


class OutOfBand(LabError):
    pass


@dataclass(frozen=True)
class BoundReport:
    name : str
    rhs_value : float
    inputs : Dict[str, Any] = field(default_factory=dict)
    minimizer : Optional[float] = None
    degenerate_limits_used : Tuple[str, ...] = ()
    boundary_minimizer : bool = False
    infinite_moment : bool = False
    lhs : Optional[float] = None

    def __post_init__(self):
        if math.isnan(self.rhs_value):
            raise LabError(f"{self.name}: bound evaluated to NaN for {self.inputs}")

    @property
    def margin(self) -> Optional[float]:
        if self.lhs is None:
            return None
        return self.rhs_value - self.lhs

    def with_lhs(self, lhs: float) -> "BoundReport":
        return replace(self, lhs=lhs)

    def to_dict(self) -> Dict[str, Any]:
        return dict(name=self.name, rhs_value=self.rhs_value, inputs=dict(self.inputs),
                    minimizer=self.minimizer, degenerate_limits_used=list(self.degenerate_limits_used),
                    boundary_minimizer=self.boundary_minimizer, infinite_moment=self.infinite_moment,
                    lhs=self.lhs, margin=self.margin)


class Infimum(NamedTuple):
    value: float
    minimizer: float
    hugs_boundary: bool
    grid_minimum: float


class ContractionRates(NamedTuple):
    w1_ckls: Optional[float] = None
    w2_vasicek: Optional[float] = None
    entropy_vasicek: Optional[float] = None

    def rate(self, kind: ContractionKind) -> Optional[float]:
        return getattr(self, kind.name)

    def ergodic(self, kind: ContractionKind) -> bool:
        value = self.rate(kind)
        return value is not None and value > 0.0


class IneCheck(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


def delta_plus(delta: float) -> float:
    return max(delta, 0.0)

def c_over_expm1(c: float, t: float) -> float:
    """c / (e^{ct} - 1), equal to 1/t at c = 0; positive for every real c."""
    if not t > 0.0:
        raise DomainError(f"t must be > 0, got {t}")
    if c == 0.0:
        return 1.0 / t
    return c / math.expm1(c * t)

def expm1_over(c: float, t: float) -> float:
    """(e^{ct} - 1) / c, equal to t at c = 0."""
    if c == 0.0:
        return t
    return math.expm1(c * t) / c

def infimum(fn: Callable[[np.ndarray], np.ndarray], upper: float) -> Infimum:
    """inf of fn over the open interval (0, upper).

    A log-spaced seed grid crowding both ends plus the fixed boundary offsets locates the
    basin; golden-section search refines it when the grid minimum is bracketed.
    """
    if not upper > 0.0:
        raise HypothesisViolated(f"Empty minimization interval (0, {upper})")
    offsets = upper * np.logspace(-9.0, math.log10(0.5), SEED_GRID_POINTS // 2)
    offsets = np.concatenate((offsets, upper * np.asarray(BOUNDARY_OFFSETS)))
    points = np.unique(np.concatenate((offsets, upper - offsets)))
    points = points[(points > 0.0) & (points < upper)]

    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        values = np.asarray(fn(points), dtype=float)
    values = np.where(np.isfinite(values), values, np.inf)
    i = int(np.argmin(values))
    best, where = float(values[i]), float(points[i])
    grid_minimum = best
    hugs_boundary = i == 0 or i == points.size - 1
    if math.isinf(best):
        return Infimum(math.inf, where, hugs_boundary, grid_minimum)

    if not hugs_boundary:
        scalar = lambda x: float(fn(np.float64(x)))
        try:
            with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
                result = optimize.minimize_scalar(scalar, bracket=(points[i - 1], where, points[i + 1]),
                                                  method="golden", tol=1e-12)
        except ValueError as e:
            logging.debug(f"Golden-section refinement skipped: {e}")
        else:
            if 0.0 < result.x < upper and math.isfinite(result.fun) and result.fun < best:
                best, where = float(result.fun), float(result.x)
    logging.trace(f"infimum over (0, {upper!r}): {best!r} at {where!r} (grid {grid_minimum!r})")
    return Infimum(best, where, hugs_boundary, grid_minimum)

def _gamma_case_one(theta: float, alpha: float, dp: float, moment: float, horizon: float,
                    extra: float) -> Infimum:
    def numerator_over(eps):
        numerator = (moment / (2.0 * theta - 1.0)
                     + (dp ** (2.0 * theta) * eps ** (1.0 - 2.0 * theta) + eps ** (-1.0 / (2.0 * theta - 1.0))) * horizon
                     + extra / eps)
        return numerator / (alpha - 3.0 * eps)
    return infimum(numerator_over, alpha / 3.0)

def _gamma_case_half(alpha: float, dp: float, moment: float, horizon: float, extra: float) -> Tuple[Infimum, bool]:
    constant = moment + (alpha + dp) * horizon
    if extra == 0.0:
        # Constant numerator: the infimum is the eps -> 0 limit.
        value = constant / (alpha - 0.5)
        return Infimum(value, 0.0, True, value), True
    return infimum(lambda eps: (constant + extra / eps) / (alpha - 0.5 - eps), alpha - 0.5), False

def harnack_addend_ckls(params: CklsParams, horizon: float, w2rho: float, w1: float,
                        mu0_moment: float) -> BoundReport:
    """Additive constant of the CKLS log-Harnack inequality.

    mu0_moment is mu0[x^(1 - 2 theta)] for theta > 1/2 and mu0[log((x + 1) / x)] for
    theta = 1/2. Only the mu0 side carries a moment condition.
    """
    if not params.harnack_ok:
        raise HypothesisViolated(f"The log-Harnack hypotheses fail for {params}")
    if not horizon > 0.0:
        raise DomainError(f"T must be > 0, got {horizon}")
    if w2rho < 0.0 or w1 < 0.0:
        raise DomainError("Distances must be >= 0")
    if mu0_moment < 0.0:
        raise DomainError(f"The mu0 moment must be >= 0, got {mu0_moment}")

    theta, alpha, delta, gamma = params.theta, params.alpha, params.delta, params.gamma
    dp = delta_plus(delta)
    inputs = dict(alpha=alpha, delta=delta, gamma=gamma, theta=theta, T=horizon, w2rho=w2rho, w1=w1,
                  mu0_moment=mu0_moment)
    limits = []
    if theta > 0.5:
        c = 2.0 * (1.0 - theta) * (delta - theta / 2.0)
    else:
        c = delta - 0.25
    if c == 0.0:
        limits.append("c_over_expm1:c=0")
    c1 = c_over_expm1(c, horizon) * w2rho ** 2
    name = "harnack_addend_ckls"

    if gamma * w1 == 0.0:
        limits.append("gamma_w1_vanishes")
        return BoundReport(name, c1, inputs, None, tuple(limits))
    if math.isinf(mu0_moment):
        return BoundReport(name, math.inf, inputs, None, tuple(limits), infinite_moment=True)

    if theta > 0.5:
        inf = _gamma_case_one(theta, alpha, dp, mu0_moment, horizon, c1)
    else:
        inf, exact = _gamma_case_half(alpha, dp, mu0_moment, horizon, c1)
        if exact:
            limits.append("epsilon->0")
    addend = c1 + gamma ** 2 * (math.exp(-2.0 * (delta - gamma) * horizon) + 1.0) * w1 ** 2 * inf.value
    logging.debug(f"{name}: C1={c1!r}, Gamma={inf.value!r} at eps={inf.minimizer!r}, addend={addend!r}")
    return BoundReport(name, addend, inputs, inf.minimizer, tuple(limits),
                       boundary_minimizer=inf.hugs_boundary and "epsilon->0" not in limits,
                       infinite_moment=math.isinf(addend))

def inverse_moment_bound(theta: float, alpha: float, delta_plus: float, x0: float, horizon: float,
                         zeta_l2: float = 0.0) -> BoundReport:
    """Upper bound on E int_0^T X_t^(-2 theta) dt from the initial point x0."""
    if not x0 > 0.0:
        raise DomainError(f"x0 must be > 0, got {x0}")
    if not horizon > 0.0:
        raise DomainError(f"T must be > 0, got {horizon}")
    if zeta_l2 < 0.0 or delta_plus < 0.0:
        raise DomainError("zeta_l2 and delta_plus must be >= 0")
    inputs = dict(theta=theta, alpha=alpha, delta_plus=delta_plus, x0=x0, T=horizon, zeta_l2=zeta_l2)
    name = "inverse_moment_bound"

    if 0.5 < theta < 1.0:
        if not alpha > 0.0:
            raise HypothesisViolated(f"The inverse-moment bound needs alpha > 0, got {alpha}")
        inf = _gamma_case_one(theta, alpha, delta_plus, x0 ** (1.0 - 2.0 * theta), horizon, zeta_l2)
        limits = ()
    elif theta == 0.5:
        if not alpha > 0.5:
            raise HypothesisViolated(f"The inverse-moment bound at theta = 1/2 needs alpha > 1/2, got {alpha}")
        inf, exact = _gamma_case_half(alpha, delta_plus, math.log1p(1.0 / x0), horizon, zeta_l2)
        limits = ("epsilon->0",) if exact else ()
    else:
        raise DomainError(f"theta must lie in [1/2, 1), got {theta}")
    logging.debug(f"{name}: {inf.value!r} at eps={inf.minimizer!r}")
    return BoundReport(name, inf.value, inputs, inf.minimizer, limits,
                       boundary_minimizer=inf.hugs_boundary and not limits,
                       infinite_moment=math.isinf(inf.value))

def sigma_t_vasicek(params: VasicekParams, t: float) -> float:
    """Sigma(t) of the Vasicek log-Harnack inequality."""
    if not t > 0.0:
        raise DomainError(f"t must be > 0, got {t}")
    beta, k = params.beta, params.k_bound
    lam = params.lip_b + params.lip_sigma ** 2 / 2.0
    head = k * c_over_expm1(2.0 * beta, t)
    drift_part = head * (1.0 + params.lip_b ** 2 * expm1_over(lam, t) ** 2)
    diffusion_part = ((k + 1.0) / 2.0 * one_minus_exp_over(2.0 * beta, t) ** -2.0 * k ** 3
                      * params.lip_sigma ** 2 * math.exp(-4.0 * beta * t) * expm1_over(beta + lam, t) ** 2)
    return drift_part + diffusion_part

def contraction_rates(params: Union[CklsParams, VasicekParams]) -> ContractionRates:
    if isinstance(params, CklsParams):
        return ContractionRates(w1_ckls=params.delta - params.gamma)
    if isinstance(params, VasicekParams):
        rate = params.beta - params.lip_b - params.lip_sigma ** 2 / 2.0
        return ContractionRates(w2_vasicek=rate, entropy_vasicek=2.0 * rate)
    raise DomainError(f"No contraction rates for {type(params).__name__}")

def lemma_ine_check(a: float, b: float, k_bound: float) -> IneCheck:
    """-log(b/a) + (b^2 - a^2)/(2a^2) <= (K+1)/2 (b-a)^2/a^2 on the band y = (b-a)/a in [1/K - 1, K - 1]."""
    if not (a > 0.0 and b > 0.0):
        raise DomainError(f"a and b must be > 0, got a={a}, b={b}")
    if k_bound < 1.0:
        raise DomainError(f"K must be >= 1, got {k_bound}")
    y = (b - a) / a
    slack = 1e-12 * k_bound
    if not (1.0 / k_bound - 1.0 - slack <= y <= k_bound - 1.0 + slack):
        raise OutOfBand(f"y = {y!r} lies outside [{1.0 / k_bound - 1.0!r}, {k_bound - 1.0!r}]")
    lhs = -math.log1p(y) + (y * y + 2.0 * y) / 2.0
    rhs = (k_bound + 1.0) / 2.0 * y * y
    return IneCheck(lhs, rhs, lhs <= rhs + 1e-15)
