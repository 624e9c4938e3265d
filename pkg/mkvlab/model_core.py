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

from dataclasses import dataclass, field
import logging
import math
from typing import Any, Dict, Union

import numpy as np

from mkvlab.constants import FunctionalKind

class LabError(Exception):
    pass


class InvalidParameter(LabError):
    pass


class DomainError(LabError):
    pass


class SigmaBoundViolated(LabError):
    pass


def _require_finite(name: str, value: float) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise InvalidParameter(f"{name} must be a real number, got {value!r}")
    if not math.isfinite(value):
        raise InvalidParameter(f"{name} must be finite, got {value}")
    return value


@dataclass(frozen=True)
class CklsParams:
    """Mean-field CKLS model dX = (alpha - delta X + gamma E X) dt + |X|^theta dW."""

    alpha : float
    delta : float
    gamma : float
    theta : float
    harnack_ok : bool = field(init=False, compare=False)
    ergodic_ok : bool = field(init=False, compare=False)

    def __post_init__(self):
        _check_ckls(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CklsParams":
        try:
            return cls(data["alpha"], data["delta"], data["gamma"], data["theta"])
        except KeyError as e:
            raise InvalidParameter(f"CKLS parameters are missing {e}")

    def to_dict(self) -> Dict[str, Any]:
        return dict(alpha=self.alpha, delta=self.delta, gamma=self.gamma, theta=self.theta,
                    harnack_ok=self.harnack_ok, ergodic_ok=self.ergodic_ok)


@dataclass(frozen=True)
class MeasureFunctional:
    """A law functional that only looks at (mean, variance)."""

    kind : FunctionalKind = FunctionalKind.constant
    a : float = 0.0
    c : float = 0.0

    def __post_init__(self):
        if not isinstance(self.kind, FunctionalKind):
            try:
                object.__setattr__(self, "kind", FunctionalKind(self.kind))
            except ValueError:
                raise InvalidParameter(f"Unknown measure functional kind '{self.kind}'")
        object.__setattr__(self, "a", _require_finite("functional slope a", self.a))
        object.__setattr__(self, "c", _require_finite("functional offset c", self.c))
        if self.kind == FunctionalKind.constant and self.a != 0.0:
            raise InvalidParameter("A constant functional cannot carry a slope")

    @property
    def lipschitz(self) -> float:
        # |sqrt var(mu) - sqrt var(nu)| <= W2(mu, nu), so both affine kinds are |a|-Lipschitz.
        return abs(self.a)

    def __call__(self, mean, variance):
        if self.kind == FunctionalKind.constant:
            return self.c + 0.0 * np.asarray(mean, dtype=float)
        elif self.kind == FunctionalKind.affine_in_mean:
            return self.a * np.asarray(mean, dtype=float) + self.c
        else:
            std = np.sqrt(np.maximum(np.asarray(variance, dtype=float), 0.0))
            return self.a * std + self.c

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MeasureFunctional":
        return cls(data.get("kind", "constant"), data.get("a", 0.0), data.get("c", 0.0))

    def to_dict(self) -> Dict[str, Any]:
        return dict(kind=self.kind.value, a=self.a, c=self.c)


@dataclass(frozen=True)
class VasicekParams:
    """Distribution dependent Vasicek model dX = (gamma - beta X + b(L_X)) dt + sigma(L_X) dW."""

    gamma_drift : float
    beta : float
    b_fn : MeasureFunctional
    sigma_fn : MeasureFunctional
    lip_b : float
    lip_sigma : float
    k_bound : float

    def __post_init__(self):
        _check_vasicek(self)

    def drift_term(self, mean, variance):
        return self.b_fn(mean, variance)

    def sigma_squared(self, mean, variance) -> float:
        """sigma(mu)^2, refusing values outside [1/K, K]."""
        s2 = float(self.sigma_fn(mean, variance)) ** 2
        lo, hi = 1.0 / self.k_bound, self.k_bound
        # Relative slack for the round trip sqrt -> square of exact band values.
        slack = 1e-12 * hi
        if not (lo - slack <= s2 <= hi + slack):
            raise SigmaBoundViolated(
                f"sigma^2 = {s2!r} left [{lo!r}, {hi!r}] at mean={float(mean)!r}, variance={float(variance)!r}"
            )
        return s2

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "VasicekParams":
        try:
            return cls(
                data["gamma_drift"],
                data["beta"],
                MeasureFunctional.from_dict(data.get("b", {})),
                MeasureFunctional.from_dict(data["sigma"]),
                data.get("lip_b", 0.0),
                data.get("lip_sigma", 0.0),
                data["k_bound"],
            )
        except KeyError as e:
            raise InvalidParameter(f"Vasicek parameters are missing {e}")

    def to_dict(self) -> Dict[str, Any]:
        return dict(gamma_drift=self.gamma_drift, beta=self.beta, b=self.b_fn.to_dict(),
                    sigma=self.sigma_fn.to_dict(), lip_b=self.lip_b, lip_sigma=self.lip_sigma,
                    k_bound=self.k_bound)


def _check_ckls(params: CklsParams) -> None:
    for name in ("alpha", "delta", "gamma", "theta"):
        object.__setattr__(params, name, _require_finite(name, getattr(params, name)))
    if params.alpha < 0.0:
        raise InvalidParameter(f"alpha must be >= 0, got {params.alpha}")
    if params.gamma < 0.0:
        raise InvalidParameter(f"gamma must be >= 0, got {params.gamma}")
    if not 0.5 <= params.theta < 1.0:
        raise InvalidParameter(f"theta must lie in [1/2, 1), got {params.theta}")

    theta, alpha, delta = params.theta, params.alpha, params.delta
    if theta > 0.5:
        harnack_ok = alpha >= theta / 2.0 and delta > 0.0
    else:
        harnack_ok = alpha > 0.5 and delta > 0.0
    object.__setattr__(params, "harnack_ok", harnack_ok)
    object.__setattr__(params, "ergodic_ok", delta > params.gamma)

def _check_vasicek(params: VasicekParams) -> None:
    for name in ("gamma_drift", "beta", "lip_b", "lip_sigma", "k_bound"):
        object.__setattr__(params, name, _require_finite(name, getattr(params, name)))
    if params.k_bound < 1.0:
        raise InvalidParameter(f"k_bound must be >= 1, got {params.k_bound}")
    if params.lip_b < 0.0 or params.lip_sigma < 0.0:
        raise InvalidParameter("Lipschitz constants must be >= 0")
    for fn_name, fn, declared in (("b", params.b_fn, params.lip_b), ("sigma", params.sigma_fn, params.lip_sigma)):
        if not isinstance(fn, MeasureFunctional):
            raise InvalidParameter(f"{fn_name} must be a MeasureFunctional")
        if declared < fn.lipschitz:
            raise InvalidParameter(
                f"Declared Lipschitz constant {declared} for {fn_name} is below the functional's own constant {fn.lipschitz}"
            )

def validate(params: Union[CklsParams, VasicekParams]) -> Union[CklsParams, VasicekParams]:
    """Re-run the parameter checks; returns the record with its derived flags set."""
    if isinstance(params, CklsParams):
        _check_ckls(params)
    elif isinstance(params, VasicekParams):
        _check_vasicek(params)
    else:
        raise InvalidParameter(f"Cannot validate {type(params).__name__}")
    logging.debug(f"Validated {params}")
    return params

def one_minus_exp_over(c: float, t: float) -> float:
    """(1 - exp(-c t)) / c, equal to t at c = 0."""
    if c == 0.0:
        return t
    return -math.expm1(-c * t) / c

def exact_mean(params: CklsParams, m0: float, t: float) -> float:
    if m0 < 0.0:
        raise DomainError(f"The initial mean must be >= 0, got {m0}")
    if t < 0.0:
        raise DomainError(f"Time must be >= 0, got {t}")
    c = params.delta - params.gamma
    return math.exp(-c * t) * m0 + params.alpha * one_minus_exp_over(c, t)

def stationary_mean(params: CklsParams) -> float:
    if not params.ergodic_ok:
        raise DomainError("The CKLS mean flow has no fixed point unless delta > gamma")
    return params.alpha / (params.delta - params.gamma)

def intrinsic_transform(x, theta: float):
    """T(x) = x^(1-theta) / (1-theta); rho(x, y) = |T(x) - T(y)|."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0):
        raise DomainError("The intrinsic metric is only defined on [0, inf)")
    if not 0.5 <= theta < 1.0:
        raise InvalidParameter(f"theta must lie in [1/2, 1), got {theta}")
    return np.power(x, 1.0 - theta) / (1.0 - theta)

def rho(x, y, theta: float):
    d = np.abs(intrinsic_transform(x, theta) - intrinsic_transform(y, theta))
    return float(d) if d.ndim == 0 else d
