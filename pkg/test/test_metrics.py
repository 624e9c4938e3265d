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

import math
from pathlib import Path
import tempfile
import unittest

import numpy as np

from mkvlab import metrics
from mkvlab.metrics import EmpiricalMeasure
from mkvlab.model_core import DomainError, LabError, rho

class EmpiricalMeasureTest(unittest.TestCase):
    def test_fromSamples(self):
        mu = EmpiricalMeasure.from_samples([3.0, 1.0, 2.0])
        self.assertEqual(mu.atoms.tolist(), [1.0, 2.0, 3.0])
        self.assertTrue(mu.is_uniform)
        self.assertAlmostEqual(mu.mean(), 2.0, places=15)
        self.assertAlmostEqual(mu.variance(), 2.0 / 3.0, places=15)

    def test_weightsFollowAtoms(self):
        mu = EmpiricalMeasure.from_samples([2.0, 0.0], [3.0, 1.0])
        self.assertEqual(mu.atoms.tolist(), [0.0, 2.0])
        self.assertEqual(mu.weights.tolist(), [0.25, 0.75])
        self.assertFalse(mu.is_uniform)

    def test_rejects(self):
        with self.assertRaises(metrics.EmptyMeasure):
            EmpiricalMeasure.from_samples([])
        with self.assertRaises(LabError):
            EmpiricalMeasure(np.array([1.0, 0.0]), np.array([0.5, 0.5]))
        with self.assertRaises(LabError):
            EmpiricalMeasure(np.array([0.0, 1.0]), np.array([0.5, 0.6]))

    def test_quantile(self):
        mu = EmpiricalMeasure.from_samples([0.0, 1.0, 2.0, 3.0])
        self.assertEqual(mu.quantile([0.1, 0.25, 0.26, 1.0]).tolist(), [0.0, 0.0, 1.0, 3.0])

    def test_fromCsv(self):
        with tempfile.TemporaryDirectory() as td:
            path = Path(td, "law.csv")
            path.write_text("x\n2.0\n0.5\n\n1.0\n")
            mu = EmpiricalMeasure.from_csv(path)
        self.assertEqual(mu.atoms.tolist(), [0.5, 1.0, 2.0])


class WassersteinTest(unittest.TestCase):
    def test_w1Uniform(self):
        mu = EmpiricalMeasure.from_samples([0.0, 2.0])
        nu = EmpiricalMeasure.from_samples([1.0, 3.0])
        self.assertEqual(metrics.wasserstein_p(mu, nu, 1.0), 1.0)

    def test_diracs(self):
        a, b = EmpiricalMeasure.dirac(1.0), EmpiricalMeasure.dirac(3.0)
        self.assertEqual(metrics.wasserstein_p(a, b, 1.0), 2.0)
        self.assertEqual(metrics.wasserstein_p(a, b, 2.0), 2.0)
        self.assertEqual(metrics.wasserstein_p(a, a, 2.0), 0.0)

    def test_badExponent(self):
        a = EmpiricalMeasure.dirac(1.0)
        with self.assertRaises(DomainError):
            metrics.wasserstein_p(a, a, 0.5)

    def test_rho2(self):
        mu, nu = EmpiricalMeasure.dirac(1.0), EmpiricalMeasure.dirac(4.0)
        self.assertEqual(metrics.wasserstein_rho2(mu, nu, 0.5), 2.0)
        with self.assertRaises(DomainError):
            metrics.wasserstein_rho2(EmpiricalMeasure.dirac(-1.0), nu, 0.5)

    def _random_measure(self, rng, nonnegative):
        size = int(rng.integers(1, 7))
        values = rng.exponential(size=size) if nonnegative else rng.normal(size=size)
        if rng.random() < 0.25:
            return EmpiricalMeasure.from_samples(values)
        return EmpiricalMeasure.from_samples(values, rng.dirichlet(np.ones(size)))

    def test_againstBruteForce(self):
        rng = np.random.default_rng(7)
        for trial in range(100):
            mu = self._random_measure(rng, False)
            nu = self._random_measure(rng, False)
            for p in (1.0, 2.0):
                cost = np.abs(mu.atoms[:, None] - nu.atoms[None, :]) ** p
                exact = metrics.brute_force_transport(mu, nu, cost)
                with self.subTest(trial=trial, p=p, sizes=(mu.size, nu.size)):
                    self.assertLess(abs(metrics.wasserstein_p(mu, nu, p) ** p - exact), 1e-10)

    def test_rho2AgainstBruteForce(self):
        rng = np.random.default_rng(11)
        theta = 0.75
        for trial in range(100):
            mu = self._random_measure(rng, True)
            nu = self._random_measure(rng, True)
            cost = rho(mu.atoms[:, None], nu.atoms[None, :], theta) ** 2
            exact = metrics.brute_force_transport(mu, nu, cost)
            with self.subTest(trial=trial, sizes=(mu.size, nu.size)):
                self.assertLess(abs(metrics.wasserstein_rho2(mu, nu, theta) ** 2 - exact), 1e-10)

    def test_triangleInequality(self):
        rng = np.random.default_rng(3)
        for trial in range(50):
            a, b, c = (self._random_measure(rng, False) for _ in range(3))
            for p in (1.0, 2.0, 3.0):
                ab = metrics.wasserstein_p(a, b, p)
                bc = metrics.wasserstein_p(b, c, p)
                ac = metrics.wasserstein_p(a, c, p)
                with self.subTest(trial=trial, p=p):
                    self.assertLessEqual(ac, ab + bc + 1e-12)
                    self.assertAlmostEqual(ab, metrics.wasserstein_p(b, a, p), places=12)

    def test_bruteForceUnequal(self):
        mu = EmpiricalMeasure(np.array([0.0, 1.0]), np.array([0.25, 0.75]))
        nu = EmpiricalMeasure(np.array([0.0, 0.5, 2.0]), np.array([0.5, 0.25, 0.25]))
        cost = np.abs(mu.atoms[:, None] - nu.atoms[None, :])
        self.assertAlmostEqual(metrics.brute_force_transport(mu, nu, cost), metrics.wasserstein_p(mu, nu), places=10)

    def test_bruteForceCap(self):
        mu = EmpiricalMeasure.from_samples(np.arange(9.0))
        with self.assertRaises(metrics.TooLarge):
            metrics.brute_force_transport(mu, mu, np.zeros((9, 9)))


class MomentTest(unittest.TestCase):
    def test_powerMoment(self):
        mu = EmpiricalMeasure.from_samples([1.0, 4.0])
        self.assertAlmostEqual(metrics.power_moment(mu, -0.5), 0.75, places=15)
        self.assertEqual(metrics.power_moment(EmpiricalMeasure.from_samples([0.0, 1.0]), -0.5), math.inf)
        with self.assertRaises(DomainError):
            metrics.power_moment(EmpiricalMeasure.dirac(-1.0), 1.0)

    def test_logRatioMoment(self):
        self.assertAlmostEqual(metrics.log_ratio_moment(EmpiricalMeasure.dirac(1.0)), math.log(2.0), places=15)
        self.assertEqual(metrics.log_ratio_moment(EmpiricalMeasure.dirac(0.0)), math.inf)


class ExponentialFitTest(unittest.TestCase):
    def test_exactDecay(self):
        times = np.linspace(0.0, 3.0, 31)
        fit = metrics.fit_exponential_rate(times, 5.0 * np.exp(-2.0 * times))
        self.assertAlmostEqual(fit.rate, 2.0, places=9)
        self.assertAlmostEqual(fit.intercept, math.log(5.0), places=9)
        self.assertAlmostEqual(fit.r_squared, 1.0, places=9)

    def test_noisyDecay(self):
        rng = np.random.default_rng(5)
        times = np.linspace(0.0, 3.0, 101)
        values = 5.0 * np.exp(-2.0 * times) * np.exp(0.01 * rng.standard_normal(times.size))
        fit = metrics.fit_exponential_rate(times, values)
        self.assertAlmostEqual(fit.rate, 2.0, delta=0.01)
        self.assertAlmostEqual(fit.intercept, math.log(5.0), delta=0.02)
        self.assertGreater(fit.r_squared, 0.999)
        self.assertLess(fit.r_squared, 1.0)

    def test_flatCurve(self):
        for level in (1.0, 3.0, 0.2):
            fit = metrics.fit_exponential_rate(np.linspace(0.0, 2.0, 31), np.full(31, level))
            self.assertAlmostEqual(fit.rate, 0.0, places=12)
            self.assertAlmostEqual(fit.intercept, math.log(level), places=12)
            self.assertEqual(fit.r_squared, 1.0)

    def test_rejects(self):
        with self.assertRaises(metrics.NonPositiveValue):
            metrics.fit_exponential_rate([0.0, 1.0, 2.0], [1.0, 0.0, 1.0])
        with self.assertRaises(metrics.NonPositiveValue):
            metrics.fit_exponential_rate([0.0, 1.0, 2.0], [1.0, -0.5, 0.25])
        with self.assertRaises(LabError):
            metrics.fit_exponential_rate([0.0, 1.0, 2.0], [1.0, 0.5])
        with self.assertRaises(LabError):
            metrics.fit_exponential_rate([0.0, 1.0], [1.0, 0.5])
