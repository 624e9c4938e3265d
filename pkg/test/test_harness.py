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
import json
import math
from pathlib import Path
import sys
import tempfile
import time
import unittest
from unittest import mock

import numpy as np

from mkvlab import __main__ as cli
from mkvlab import experiment, harness, reporting
from mkvlab.bounds import HypothesisViolated
from mkvlab.constants import *
from mkvlab.model_core import CklsParams
from mkvlab.particle_engine import SimConfig
from mkvlab.utils import sha256_file

def _config(kind, **document):
    document["schema_version"] = SCHEMA_VERSION
    return experiment.make_config(kind, document)

_small = {"n_particles": 2000, "dt": 0.01, "horizon": 1.0}

class _TimedTest(unittest.TestCase):
    def setUp(self):
        self.start_time = time.perf_counter()

    def tearDown(self):
        print(f"{time.perf_counter() - self.start_time:.3f}s", end=" ")
        sys.stdout.flush()


class CheckTest(unittest.TestCase):
    def test_relations(self):
        check = harness._check("c", 1.0, 0.5, 0.5)
        self.assertTrue(check.passed)
        self.assertEqual(check.margin, -0.5)
        check = harness._check("c", 1.0, 1.5, 0.1, ">=")
        self.assertFalse(check.passed)
        self.assertEqual(check.to_dict()["relation"], ">=")


class DeterministicExperimentTest(_TimedTest):
    def test_yw(self):
        result = harness.run(_config(ExperimentKind.verify_yw, epsilons=[0.1], grid_points=200))
        self.assertTrue(result.passed, [i.name for i in result.checks if not i.passed])
        self.assertEqual(result.columns, ("epsilon",) + yw_columns)
        self.assertEqual(len(result.checks), 7)

    def test_lemmaIne(self):
        result = harness.run(_config(ExperimentKind.verify_lemma_ine, k_values=[1.0, 2.0, 10.0], grid_points=100))
        self.assertTrue(result.passed)
        self.assertEqual(len(result.checks), 6)
        self.assertEqual(result.columns, ("k", "y", "lhs", "rhs"))

    def test_harnackVasicek(self):
        result = harness.run(experiment.make_config(ExperimentKind.verify_harnack_vasicek))
        self.assertTrue(result.passed, [i.name for i in result.checks if not i.passed])
        # 2 cases x 2 initial pairs x 3 horizons x 2 functions, plus the classical identity per horizon.
        self.assertEqual(len(result.checks), 27)
        self.assertEqual(len(result.bounds), 12)

    def test_w2EntropyContraction(self):
        result = harness.run(experiment.make_config(ExperimentKind.verify_w2_entropy_contraction))
        self.assertTrue(result.passed, [i.name for i in result.checks if not i.passed])
        self.assertEqual(len(result.rows), 81)
        names = {i.name for i in result.checks}
        self.assertIn("w2_fitted_rate", names)
        fits = {i.name: i.measured for i in result.checks if i.name.startswith("entropy_fitted_rate")}
        self.assertEqual(set(fits), {"entropy_fitted_rate[a]", "entropy_fitted_rate[b]"})
        # Law a starts on the stationary mean, so only the variance mode (about 3.7) decays.
        self.assertGreater(fits["entropy_fitted_rate[a]"], 3.0)
        # Law b starts off it and decays at the mean mode 2 (beta - L_b) = 1.6.
        self.assertGreaterEqual(fits["entropy_fitted_rate[b]"], 1.59)
        self.assertAlmostEqual(fits["entropy_fitted_rate[b]"], 1.6, delta=0.005)
        self.assertEqual(len(result.columns), 5)
        self.assertTrue(all(row[3] != "" and row[4] != "" for row in result.rows))

    def test_degenerateFlow(self):
        cfg = experiment.make_config(ExperimentKind.verify_harnack_vasicek)
        params = cfg.vasicek_cases()[1]
        with self.assertRaises(harness.LabError):
            harness.verify_harnack_vasicek(params, 0.0, 1.0, 0.0, cfg.test_functions())


class MonteCarloExperimentTest(_TimedTest):
    def test_simulateCkls(self):
        result = harness.run(_config(ExperimentKind.simulate_ckls,
                                     simulation=dict(_small, snapshot_times=[0.0, 0.5, 1.0], mean_field_mode="empirical")))
        self.assertTrue(result.passed, [i.name for i in result.checks if not i.passed])
        self.assertEqual(result.columns, summary_columns)
        self.assertEqual(len(result.rows), 3)

    def test_simulateCklsFull(self):
        result = harness.run(_config(ExperimentKind.simulate_ckls, simulation=dict(_small, n_particles=10),
                                     output={"series": "full"}))
        self.assertEqual(result.columns, ("time", "particle_index", "state"))
        self.assertEqual(len(result.rows), 20)

    def test_simulateVasicek(self):
        result = harness.run(_config(ExperimentKind.simulate_vasicek,
                                     simulation=dict(_small, n_particles=5000, horizon=0.5, snapshot_times=[0.0, 0.5])))
        self.assertTrue(result.passed, [i.name for i in result.checks if not i.passed])
        columns, rows = result.extra_series[trajectory_file_name]
        self.assertEqual(columns, trajectory_columns)
        self.assertEqual(len(rows), 501)
        self.assertEqual(rows[0][0], 0.0)
        self.assertAlmostEqual(rows[-1][0], 0.5, places=12)

    def test_harnackCkls(self):
        result = harness.run(_config(ExperimentKind.verify_harnack_ckls,
                                     ckls_cases=[{"alpha": 1.0, "delta": 1.0, "gamma": 0.25, "theta": 0.5}],
                                     horizons=[1.0], simulation=_small))
        self.assertTrue(result.passed, [i.name for i in result.checks if not i.passed])
        self.assertEqual(len(result.checks), 2)
        self.assertEqual(len(result.bounds), 1)
        self.assertGreater(result.bounds[0].rhs_value, 0.0)

    def test_harnackHypotheses(self):
        params = CklsParams(alpha=0.5, delta=1.0, gamma=0.0, theta=0.5)
        cfg = SimConfig(**_small)
        with self.assertRaises(HypothesisViolated):
            harness.verify_harnack_ckls(params, 1.0, 2.0, 1.0, [], cfg)

    def test_w1Contraction(self):
        result = harness.run(_config(ExperimentKind.verify_w1_contraction,
                                     simulation=dict(_small, horizon=2.0, snapshot_times=[0.0, 0.5, 1.0, 1.5, 2.0])))
        self.assertTrue(result.passed, [i.name for i in result.checks if not i.passed])
        self.assertEqual(len(result.rows), 5)
        fit = next(i for i in result.checks if i.name == "w1_fitted_rate")
        self.assertAlmostEqual(fit.measured, 0.75, delta=0.05)

    def test_notErgodic(self):
        with self.assertRaises(harness.NotErgodic):
            harness.run(_config(ExperimentKind.verify_w1_contraction,
                                ckls={"alpha": 1.0, "delta": 0.25, "gamma": 0.25, "theta": 0.5}, simulation=_small))

    def test_inverseMoment(self):
        result = harness.run(_config(ExperimentKind.verify_inverse_moment,
                                     simulation={"n_particles": 1000, "dt": 1e-3, "horizon": 1.0}))
        self.assertTrue(result.passed, [i.name for i in result.checks if not i.passed])
        self.assertEqual(len(result.rows), 2)
        self.assertAlmostEqual(result.bounds[1].rhs_value, 2.0 * (1.0 + math.log(2.0)), places=10)

    def test_stationary(self):
        params = CklsParams(alpha=1.0, delta=1.0, gamma=0.25, theta=0.5)
        cfg = SimConfig(n_particles=2000, dt=0.01, horizon=1.0, seed=5, mean_field_mode=MeanFieldMode.empirical)
        outcome = harness.stationary_ckls(params, 1.0, 6.0, 2.0, cfg)
        self.assertEqual(len(outcome.snapshots), 3)
        self.assertEqual(len(outcome.successive_w1), 2)
        self.assertEqual(outcome.measure.size, 6000)
        self.assertAlmostEqual(outcome.measure.mean(), 4.0 / 3.0, delta=0.1)
        pooled_std = float(outcome.measure.atoms.std(ddof=1))
        self.assertAlmostEqual(outcome.stderr, pooled_std / math.sqrt(2000), places=12)
        self.assertGreater(outcome.stderr, outcome.snapshots[-1].mean_stderr() * 0.5)

        result = harness.run(_config(ExperimentKind.stationary_ckls, simulation=dict(_small, mean_field_mode="empirical"),
                                     burn_in=6.0, sample_horizon=2.0))
        mean_check = next(i for i in result.checks if i.name == "stationary_mean")
        self.assertTrue(mean_check.passed)
        self.assertNotIn("absorbed_mass", [i.name for i in result.checks])

    def test_stationaryAbsorbed(self):
        ckls = {"alpha": 0.0, "delta": 1.0, "gamma": 0.0, "theta": 0.5}
        result = harness.run(_config(ExperimentKind.stationary_ckls, ckls=ckls, simulation=_small,
                                     burn_in=20.0, sample_horizon=2.0))
        self.assertTrue(result.passed, [i.name for i in result.checks if not i.passed])
        absorbed = next(i for i in result.checks if i.name == "absorbed_mass")
        self.assertEqual(absorbed.measured, 1.0)
        self.assertEqual(absorbed.relation, ">=")


class ReportingTest(unittest.TestCase):
    def test_nonFiniteValues(self):
        def reject(token):
            raise ValueError(f"non-standard JSON token {token}")

        report = {"b": math.inf, "a": [-math.inf, math.nan, 1.5], "c": np.float64(math.inf)}
        with tempfile.TemporaryDirectory() as td:
            path = Path(td, report_file_name)
            reporting.write_report(path, report)
            loaded = json.loads(path.read_text(), parse_constant=reject)
        self.assertEqual(loaded, {"a": ["-inf", "nan", 1.5], "b": "inf", "c": "inf"})

    def test_writeRun(self):
        cfg = _config(ExperimentKind.verify_lemma_ine, k_values=[2.0], grid_points=10)
        result = harness.run(cfg)
        with tempfile.TemporaryDirectory() as td:
            out = Path(td, "nested", "out")
            paths = reporting.write_run(out, cfg.seed, cfg.to_dict(), result.report(cfg), result.columns, result.rows,
                                       {"extra.csv": (("a", "b"), [(1, 0.5)])})
            report = json.loads(paths["report"].read_text())
            manifest = json.loads(paths["manifest"].read_text())
            with paths["series"].open(newline="") as fp:
                rows = list(csv.reader(fp))

            self.assertEqual(report["experiment"], "verify-lemma-ine")
            self.assertEqual(report["schema_version"], SCHEMA_VERSION)
            self.assertTrue(report["passed"])
            self.assertEqual(list(report), sorted(report))
            self.assertEqual(manifest["seed"], cfg.seed)
            self.assertEqual(manifest["outputs"][report_file_name], sha256_file(paths["report"]))
            self.assertEqual(manifest["outputs"][series_file_name], sha256_file(paths["series"]))
            self.assertEqual(manifest["outputs"]["extra.csv"], sha256_file(paths["extra"]))
            self.assertEqual(paths["extra"].read_text(), "a,b\n1,0.5\n")
            self.assertEqual(rows[0], ["k", "y", "lhs", "rhs"])
            self.assertEqual(len(rows), 1 + len(result.rows))


class CommandLineTest(_TimedTest):
    def _main(self, *argv):
        with mock.patch.object(sys, "argv", ["mkvlab", *argv]):
            with self.assertRaises(SystemExit) as ctx:
                cli.main()
        return ctx.exception.code

    def test_experiment(self):
        with tempfile.TemporaryDirectory() as td:
            out = Path(td, "out")
            code = self._main("-q", "--settings", str(Path(td, "none.ini")), "verify-lemma-ine", "--out", str(out))
            self.assertEqual(code, ExitCode.success)
            self.assertTrue(out.joinpath(report_file_name).is_file())
            self.assertTrue(out.joinpath(series_file_name).is_file())
            self.assertTrue(out.joinpath(manifest_file_name).is_file())

    def test_configError(self):
        with tempfile.TemporaryDirectory() as td:
            path = Path(td, "bad.json")
            path.write_text(json.dumps({"schema_version": 1, "k_values": [0.5]}))
            code = self._main("-q", "--settings", str(Path(td, "none.ini")), "verify-lemma-ine",
                              "--config", str(path), "--out", td)
            self.assertEqual(code, ExitCode.config_error)

    def test_dumpTools(self):
        with tempfile.TemporaryDirectory() as td:
            settings = Path(td, "mkvlab.ini")
            self.assertEqual(self._main("-q", "--settings", str(settings), "dumpconfig"), ExitCode.success)
            self.assertTrue(settings.is_file())

            table = Path(td, "yw.csv")
            self.assertEqual(self._main("-q", "dump-yw", str(table), "--epsilon", "0.2", "--points", "50"),
                             ExitCode.success)
            with table.open(newline="") as fp:
                self.assertEqual(next(csv.reader(fp)), list(yw_columns))
            self.assertEqual(self._main("-q", "dump-yw", str(table), "--epsilon", "2"), ExitCode.config_error)

    def test_noCommand(self):
        self.assertEqual(self._main("-q"), ExitCode.config_error)
