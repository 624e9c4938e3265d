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

import csv
from dataclasses import dataclass
import itertools
import logging
import math
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import optimize

from mkvlab.model_core import DomainError, LabError, intrinsic_transform

# Vertex enumeration stays tractable up to this many atoms per side.
BRUTE_FORCE_MAX_ATOMS = 8

class EmptyMeasure(LabError):
    pass


class TooLarge(LabError):
    pass


class NonPositiveValue(LabError):
    pass


@dataclass(frozen=True)
class EmpiricalMeasure:
    atoms : np.ndarray
    weights : np.ndarray

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=float).ravel()
        weights = np.array(self.weights, dtype=float).ravel()
        if atoms.size == 0:
            raise EmptyMeasure("An empirical measure needs at least one atom")
        if atoms.shape != weights.shape:
            raise LabError(f"{atoms.size} atoms but {weights.size} weights")
        if not np.all(np.isfinite(atoms)):
            raise LabError("Atoms must be finite")
        if np.any(np.diff(atoms) < 0.0):
            raise LabError("Atoms must be sorted")
        if np.any(weights <= 0.0):
            raise LabError("Weights must be positive")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise LabError(f"Weights sum to {weights.sum()!r}, expected 1")
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_samples(cls, values, weights=None) -> "EmpiricalMeasure":
        values = np.asarray(values, dtype=float).ravel()
        if values.size == 0:
            raise EmptyMeasure("An empirical measure needs at least one atom")
        if weights is None:
            weights = np.full(values.size, 1.0 / values.size)
        else:
            weights = np.asarray(weights, dtype=float).ravel()
            weights = weights / weights.sum()
        order = np.argsort(values, kind="stable")
        return cls(values[order], weights[order])

    @classmethod
    def dirac(cls, x: float) -> "EmpiricalMeasure":
        return cls(np.array([float(x)]), np.array([1.0]))

    @classmethod
    def from_csv(cls, path: Path) -> "EmpiricalMeasure":
        logging.debug(f"Reading empirical measure from '{path}'")
        values = []
        with path.open("r", newline="") as fp:
            for row in csv.reader(fp):
                if not row or not row[0].strip():
                    continue
                try:
                    values.append(float(row[0]))
                except ValueError:
                    # Header row
                    if values:
                        raise LabError(f"'{path}': non-numeric value {row[0]!r}")
        return cls.from_samples(values)

    @property
    def size(self) -> int:
        return self.atoms.size

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))

    def mean(self) -> float:
        return float(np.dot(self.weights, self.atoms))

    def variance(self) -> float:
        return float(np.dot(self.weights, (self.atoms - self.mean()) ** 2))

    def quantile(self, qs) -> np.ndarray:
        """Left-continuous quantile function evaluated at qs in (0, 1]."""
        cws = np.cumsum(self.weights)
        idx = np.searchsorted(cws, np.asarray(qs, dtype=float))
        return self.atoms[np.clip(idx, 0, self.size - 1)]

    def pushforward(self, fn: Callable[[np.ndarray], np.ndarray]) -> "EmpiricalMeasure":
        """Image under a non-decreasing map, which keeps the atom order."""
        return EmpiricalMeasure(fn(self.atoms), self.weights)


class ExponentialFit(NamedTuple):
    rate: float
    intercept: float
    r_squared: float


def wasserstein_p(mu: EmpiricalMeasure, nu: EmpiricalMeasure, p: float = 1.0) -> float:
    """W_p through the quantile coupling, integrating over merged cumulative-weight breakpoints."""
    if mu.size == 0 or nu.size == 0:
        raise EmptyMeasure("Cannot transport an empty measure")
    if p < 1.0:
        raise DomainError(f"p must be >= 1, got {p}")

    qs = np.sort(np.concatenate((np.cumsum(mu.weights), np.cumsum(nu.weights))))
    qs = np.clip(qs, 0.0, 1.0)
    delta = np.diff(np.concatenate(([0.0], qs)))
    diff = np.abs(mu.quantile(qs) - nu.quantile(qs))
    if p == 1.0:
        return float(np.dot(delta, diff))
    return float(np.dot(delta, diff ** p) ** (1.0 / p))

def wasserstein_rho2(mu: EmpiricalMeasure, nu: EmpiricalMeasure, theta: float) -> float:
    """W_{2,rho}: rho(x, y) = |T(x) - T(y)| for monotone T, so transport the images under T."""
    if np.any(mu.atoms < 0.0) or np.any(nu.atoms < 0.0):
        raise DomainError("W_{2,rho} needs measures supported on [0, inf)")
    transform = lambda x: intrinsic_transform(x, theta)
    return wasserstein_p(mu.pushforward(transform), nu.pushforward(transform), 2.0)

def _exhaustive_matching(cost: np.ndarray) -> float:
    n = cost.shape[0]
    rows = np.arange(n)
    best = min(cost[rows, list(perm)].sum() for perm in itertools.permutations(range(n)))
    return float(best) / n

def brute_force_transport(mu: EmpiricalMeasure, nu: EmpiricalMeasure, cost: np.ndarray) -> float:
    """Exact optimal transport cost for tiny measures.

    Uniform equal-size measures are matched exhaustively (Birkhoff). Otherwise the LP is solved
    and its optimal vertex is re-solved exactly from the basic support.
    """
    cost = np.asarray(cost, dtype=float)
    m, n = mu.size, nu.size
    if m > BRUTE_FORCE_MAX_ATOMS or n > BRUTE_FORCE_MAX_ATOMS:
        raise TooLarge(f"Brute force transport is capped at {BRUTE_FORCE_MAX_ATOMS} atoms per side, got {m}x{n}")
    if cost.shape != (m, n):
        raise LabError(f"Cost matrix has shape {cost.shape}, expected {(m, n)}")

    if m == n and mu.is_uniform and nu.is_uniform:
        return _exhaustive_matching(cost)

    a_eq = np.zeros((m + n, m * n))
    for i in range(m):
        a_eq[i, i * n:(i + 1) * n] = 1.0
    for j in range(n):
        a_eq[m + j, j::n] = 1.0
    b_eq = np.concatenate((mu.weights, nu.weights))
    result = optimize.linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0.0, None), method="highs")
    if not result.success:
        raise LabError(f"Transport LP failed: {result.message}")

    # Polish: the basic variables of an optimal vertex are determined by the marginals alone.
    support = np.flatnonzero(result.x > 1e-12)
    plan, *_ = np.linalg.lstsq(a_eq[:, support], b_eq, rcond=None)
    return float(np.dot(cost.ravel()[support], plan))

def power_moment(mu: EmpiricalMeasure, exponent: float) -> float:
    """mu[(.)^exponent]; atoms at 0 with a negative exponent give inf."""
    if np.any(mu.atoms < 0.0):
        raise DomainError("Power moments need measures supported on [0, inf)")
    if exponent < 0.0 and np.any(mu.atoms == 0.0):
        return math.inf
    return float(np.dot(mu.weights, np.power(mu.atoms, exponent)))

def log_ratio_moment(mu: EmpiricalMeasure) -> float:
    """mu(log((. + 1) / .)); atoms at 0 give inf."""
    if np.any(mu.atoms < 0.0):
        raise DomainError("Log moments need measures supported on [0, inf)")
    if np.any(mu.atoms == 0.0):
        return math.inf
    return float(np.dot(mu.weights, np.log1p(1.0 / mu.atoms)))

def fit_exponential_rate(times: Sequence[float], values: Sequence[float]) -> ExponentialFit:
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size < 3 or times.size != values.size:
        raise LabError(f"An exponential fit needs at least 3 paired points, got {times.size}")
    if np.any(values <= 0.0):
        raise NonPositiveValue("Exponential fits need strictly positive values")

    logs = np.log(values)
    slope, intercept = np.polyfit(times, logs, 1)
    residual = logs - (slope * times + intercept)
    total = np.sum((logs - logs.mean()) ** 2)
    # A flat curve is fitted exactly; its spread is only rounding.
    flat = total <= np.finfo(float).eps * float(np.sum(logs ** 2))
    r_squared = 1.0 if flat else 1.0 - float(np.sum(residual ** 2)) / float(total)
    return ExponentialFit(-float(slope), float(intercept), r_squared)
