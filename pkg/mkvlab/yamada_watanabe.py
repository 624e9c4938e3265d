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

"""Smoothing functions psi_eps, V_eps and V0_eps used in Yamada-Watanabe arguments.

psi_eps(x) = (2/x) T(ln x), with T the unit tent on [ln eps - 1, ln eps]. In the log
coordinate s = ln x - ln eps + 1 in [0, 1] the tent is 2s / 2(1-s), so the antiderivative
Phi_eps and the double integral V_eps have piecewise closed forms.
"""

from dataclasses import dataclass
import math
from typing import Dict, Tuple

import numpy as np

from mkvlab.model_core import InvalidParameter

_SQRT_E = math.exp(0.5)

# G(s) = int_0^s Phi(r) e^r dr, see _g below. G at the tent peak.
_G_HALF = 2.5 * _SQRT_E - 4.0


def _g(s: np.ndarray) -> np.ndarray:
    lower = 2.0 * (np.exp(s) * (s * s - 2.0 * s + 2.0) - 2.0)
    upper = _G_HALF + np.exp(s) * (-2.0 * s * s + 8.0 * s - 9.0) + 5.5 * _SQRT_E
    return np.where(s <= 0.5, lower, upper)


@dataclass(frozen=True)
class YwFamily:
    epsilon : float

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise InvalidParameter(f"epsilon must lie in (0, 1), got {self.epsilon}")

    @property
    def support(self) -> Tuple[float, float]:
        return self.epsilon / math.e, self.epsilon

    @property
    def v_at_epsilon(self) -> float:
        """V_eps(eps) = (eps/e) G(1)."""
        return self.epsilon / math.e * float(_g(np.float64(1.0)))

    def _log_coordinate(self, r: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            s = np.log(r) - math.log(self.epsilon) + 1.0
        return np.clip(s, 0.0, 1.0)

    def psi(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.support
        inside = (x >= lo) & (x <= hi)
        s = self._log_coordinate(np.where(inside, x, hi))
        tent = np.where(s <= 0.5, 2.0 * s, 2.0 * (1.0 - s))
        with np.errstate(divide="ignore", invalid="ignore"):
            value = np.where(inside, 2.0 * tent / np.where(inside, x, 1.0), 0.0)
        return value if value.ndim else float(value)

    def phi(self, y):
        """Phi_eps(y) = int_0^y psi_eps, exactly 1 for y >= eps."""
        y = np.asarray(y, dtype=float)
        lo, hi = self.support
        s = self._log_coordinate(np.where(y > lo, np.minimum(y, hi), hi))
        ramp = np.where(s <= 0.5, 2.0 * s * s, 1.0 - 2.0 * (1.0 - s) ** 2)
        value = np.where(y <= lo, 0.0, np.where(y >= hi, 1.0, ramp))
        return value if value.ndim else float(value)

    def _v_abs(self, r: np.ndarray) -> np.ndarray:
        lo, hi = self.support
        s = self._log_coordinate(np.where(r > lo, np.minimum(r, hi), hi))
        inner = lo * _g(s)
        return np.where(r <= lo, 0.0, np.where(r >= hi, self.v_at_epsilon + (r - hi), inner))

    def v(self, x):
        """(V, V', V'') of the smoothed absolute value."""
        x = np.asarray(x, dtype=float)
        r = np.abs(x)
        value = self._v_abs(r)
        first = np.sign(x) * self.phi(r)
        second = self.psi(r)
        return _unwrap(value, first, second)

    def v0(self, x):
        """(V0, V0', V0'') of the smoothed negative part; V0(x) = V(x^-)."""
        x = np.asarray(x, dtype=float)
        neg = np.maximum(-x, 0.0)
        value = self._v_abs(neg)
        first = -self.phi(neg)
        second = self.psi(neg)
        return _unwrap(value, first, second)

    def table(self, xs):
        xs = np.asarray(xs, dtype=float)
        value, first, second = self.v(xs)
        return np.column_stack((xs, self.psi(xs), value, first, second))


def _unwrap(*arrays):
    arrays = tuple(np.asarray(i, dtype=float) for i in arrays)
    if arrays[0].ndim == 0:
        return tuple(float(i) for i in arrays)
    return arrays


def _excess(value, lower, upper) -> float:
    over = np.maximum(np.maximum(lower - value, value - upper), 0.0)
    return float(over.max()) if over.size else 0.0

def property_violations(fam: YwFamily, xs) -> Dict[str, float]:
    """Largest violation of each stated bound over the points xs; 0.0 means it holds."""
    xs = np.asarray(xs, dtype=float).ravel()
    lo, hi = fam.support
    r = np.abs(xs)
    neg = np.maximum(-xs, 0.0)

    def cap(t):
        inside = (t >= lo) & (t <= hi)
        with np.errstate(divide="ignore"):
            return np.where(inside, 2.0 / np.where(inside, t, 1.0), 0.0)

    pos = r[xs >= 0.0]
    psi = np.asarray(fam.psi(pos))
    v, dv, d2v = (np.asarray(i) for i in fam.v(xs))
    v0, dv0, d2v0 = (np.asarray(i) for i in fam.v0(xs))
    quiet = xs >= -lo
    return {
        "psi": max(_excess(psi, 0.0, cap(pos)), abs(fam.phi(hi) - 1.0)),
        "R10": max(_excess(v0, neg - fam.epsilon, neg), _excess(v0[quiet], 0.0, 0.0)),
        "R00": max(_excess(dv0, -1.0, 0.0), _excess(dv0[quiet], 0.0, 0.0)),
        "R20": _excess(d2v0, 0.0, cap(neg)),
        "R1": max(_excess(v, r - fam.epsilon, r), _excess(np.sign(xs) * dv, 0.0, 1.0)),
        "R2": _excess(d2v, 0.0, cap(r)),
    }
