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

import json
from pathlib import Path
import tempfile
import unittest

from mkvlab import config, experiment
from mkvlab.config import ConfigError
from mkvlab.constants import *
from mkvlab.experiment import TestFunctionSpec
from mkvlab.gaussian_flow import GaussianState
from mkvlab.metrics import EmpiricalMeasure

class SettingsTest(unittest.TestCase):
    def test_dumpAndRead(self):
        with tempfile.TemporaryDirectory() as td:
            path = Path(td, "mkvlab.ini")
            config.dump_default_config(path)
            text = path.read_text()
            settings = config.load_settings(config.read_config(path))
        self.assertIn("[verification]", text)
        self.assertIn("; Monte Carlo checks pass within this many standard errors.", text)
        self.assertEqual(settings, config.default_settings())
        self.assertEqual(settings.tolerances, config.Tolerances())
        self.assertIsNone(settings.threads)
        self.assertEqual(settings.series, SeriesMode.summary)
        self.assertEqual(settings.chunk_size, DEFAULT_CHUNK_SIZE)

    def test_overrides(self):
        with tempfile.TemporaryDirectory() as td:
            path = Path(td, "mkvlab.ini")
            path.write_text("[output]\nseries = FULL\n\n[simulation]\nthreads = 3\n\n[verification]\nmc_sigmas = 4\n")
            settings = config.load_settings(config.read_config(path))
        self.assertEqual(settings.series, SeriesMode.full)
        self.assertEqual(settings.threads, 3)
        self.assertEqual(settings.tolerances.mc_sigmas, 4.0)

    def test_missingFile(self):
        settings = config.load_settings(config.read_config(Path("/nonexistent/mkvlab.ini")))
        self.assertEqual(settings, config.default_settings())

    def test_badValues(self):
        for text in ("[simulation]\nthreads = many\n", "[simulation]\nchunk_size = 0\n",
                     "[output]\nseries = some\n", "[simulation]\ninverse_moment_floor = 0\n"):
            with tempfile.TemporaryDirectory() as td:
                path = Path(td, "mkvlab.ini")
                path.write_text(text)
                with self.assertRaises(ConfigError, msg=text):
                    config.load_settings(config.read_config(path))

    def test_badValueNamesOption(self):
        with tempfile.TemporaryDirectory() as td:
            path = Path(td, "mkvlab.ini")
            path.write_text("[verification]\nmc_sigmas = lots\n")
            with self.assertRaises(ConfigError) as ctx:
                config.load_settings(config.read_config(path))
        self.assertIn("verification.mc_sigmas must be a float", str(ctx.exception))

    def test_unknownOptions(self):
        for text, needle in (("[verification]\nmc_sigma = 4\n", "mc_sigma"),
                             ("[simulaton]\nthreads = 2\n", "[simulaton]")):
            with tempfile.TemporaryDirectory() as td:
                path = Path(td, "mkvlab.ini")
                path.write_text(text)
                with self.assertRaises(ConfigError, msg=text) as ctx:
                    config.load_settings(config.read_config(path))
            self.assertIn(needle, str(ctx.exception))

    def test_dumpedKinds(self):
        with tempfile.TemporaryDirectory() as td:
            path = Path(td, "mkvlab.ini")
            config.dump_default_config(path)
            text = path.read_text()
        self.assertIn("; (integer, default 0)\nthreads = 0\n", text)
        self.assertIn("; (series mode, default summary)\nseries = summary\n", text)
        self.assertIn("; (boolean, default false)\nprogress = false\n", text)


class SchemaTest(unittest.TestCase):
    def test_defaultsValidate(self):
        for kind in ExperimentKind:
            experiment.validate_document(experiment.defaults_for(kind))

    def test_defaultsBuild(self):
        settings = config.default_settings()
        for kind in ExperimentKind:
            cfg = experiment.make_config(kind)
            self.assertEqual(cfg.kind, kind)
            if "simulation" in cfg.data:
                cfg.sim_config(settings)
            if "initial" in cfg.data:
                cfg.law_pairs()
            cfg.test_functions()

    def _rejected_at(self, document):
        with self.assertRaises(ConfigError) as ctx:
            experiment.make_config(ExperimentKind.simulate_ckls, document)
        return str(ctx.exception)

    def test_rejects(self):
        self.assertTrue(self._rejected_at({"schema_version": 1, "seed": -1}).startswith("$.seed:"))
        self.assertTrue(self._rejected_at({"schema_version": 1, "simulation": {"dt": -1}}).startswith("$.simulation.dt:"))
        self.assertTrue(self._rejected_at({"schema_version": 1, "ckls_cases": [{"alpha": 1}]}).startswith("$.ckls_cases[0]"))
        self.assertTrue(self._rejected_at({"schema_version": 1, "colour": "red"}).startswith("$:"))
        self.assertTrue(self._rejected_at({"seed": 1}).startswith("$:"))
        self.assertTrue(self._rejected_at({"schema_version": 2}).startswith("$.schema_version:"))

    def test_lawOneOf(self):
        message = self._rejected_at({"schema_version": 1, "initial": {"a": {"dirac": "one"}, "b": {"dirac": 1.0}}})
        self.assertTrue(message.startswith("$.initial.a"), message)

    def test_wrongExperiment(self):
        with self.assertRaises(ConfigError):
            experiment.make_config(ExperimentKind.simulate_ckls, {"schema_version": 1, "experiment": "verify-yw"})
        cfg = experiment.make_config(ExperimentKind.verify_yw, {"schema_version": 1, "experiment": "verify-yw"})
        self.assertEqual(cfg.to_dict()["experiment"], "verify-yw")


class ExperimentConfigTest(unittest.TestCase):
    def test_overrides(self):
        cfg = experiment.make_config(ExperimentKind.verify_yw, {"schema_version": 1, "epsilons": [0.2]},
                                     seed=7, out=Path("/tmp/out"))
        self.assertEqual(cfg.seed, 7)
        self.assertEqual(cfg.data["epsilons"], [0.2])
        self.assertEqual(cfg.data["grid_points"], 1000)
        self.assertEqual(cfg.output_directory, Path("/tmp/out"))
        self.assertIsNone(cfg.series_mode)
        with self.assertRaises(ConfigError):
            experiment.make_config(ExperimentKind.verify_yw, seed=-3)

    def test_missingSection(self):
        cfg = experiment.make_config(ExperimentKind.verify_yw)
        with self.assertRaises(ConfigError):
            cfg.ckls()
        with self.assertRaises(ConfigError):
            cfg.sim_config()

    def test_simConfig(self):
        cfg = experiment.make_config(ExperimentKind.simulate_ckls, seed=11)
        settings = config.default_settings()
        sim = cfg.sim_config(settings, n_particles=50)
        self.assertEqual(sim.seed, 11)
        self.assertEqual(sim.horizon, 2.0)
        self.assertEqual(sim.n_particles, 50)
        self.assertEqual(sim.mean_field_mode, MeanFieldMode.empirical)
        self.assertEqual(sim.chunk_size, settings.chunk_size)

        bad = experiment.make_config(ExperimentKind.simulate_ckls,
                                     {"schema_version": 1, "simulation": {"n_particles": 10, "dt": 2.0, "horizon": 1.0}})
        with self.assertRaises(ConfigError):
            bad.sim_config()

    def test_cases(self):
        cfg = experiment.make_config(ExperimentKind.verify_harnack_ckls)
        self.assertEqual([i.theta for i in cfg.ckls_cases()], [0.5, 0.75])
        cfg = experiment.make_config(ExperimentKind.verify_w1_contraction)
        self.assertEqual(len(cfg.ckls_cases()), 1)
        cfg = experiment.make_config(ExperimentKind.verify_harnack_vasicek)
        self.assertEqual(len(cfg.vasicek_cases()), 2)
        self.assertEqual(len(cfg.law_pairs()), 2)

    def test_laws(self):
        self.assertEqual(experiment.parse_law({"dirac": 2}), 2.0)
        self.assertEqual(experiment.parse_law({"gaussian": {"mean": 1, "variance": 2}}), GaussianState(1.0, 2.0))
        law = experiment.parse_law({"samples": [2.0, 1.0]})
        self.assertIsInstance(law, EmpiricalMeasure)
        self.assertEqual(law.atoms.tolist(), [1.0, 2.0])
        with self.assertRaises(ConfigError):
            experiment.parse_law({"csv": "/nonexistent/law.csv"}, "$.initial.a")

        with tempfile.TemporaryDirectory() as td:
            path = Path(td, "law.csv")
            path.write_text("0.5\n1.5\n")
            self.assertEqual(experiment.parse_law({"csv": str(path)}).mean(), 1.0)

    def test_loadConfig(self):
        with tempfile.TemporaryDirectory() as td:
            path = Path(td, "cfg.json")
            path.write_text(json.dumps({"schema_version": 1, "k_values": [2.0], "output": {"series": "full"}}))
            cfg = experiment.load_config(ExperimentKind.verify_lemma_ine, path)
            self.assertEqual(cfg.data["k_values"], [2.0])
            self.assertEqual(cfg.series_mode, SeriesMode.full)

            path.write_text("{\n  \"schema_version\": 1,\n")
            with self.assertRaises(ConfigError) as ctx:
                experiment.load_config(ExperimentKind.verify_lemma_ine, path)
            self.assertIn("line", str(ctx.exception))

            with self.assertRaises(ConfigError):
                experiment.load_config(ExperimentKind.verify_lemma_ine, Path(td, "missing.json"))

        self.assertEqual(experiment.load_config(ExperimentKind.verify_yw, None).data["epsilons"], [0.5, 0.1, 0.01])


class TestFunctionSpecTest(unittest.TestCase):
    def test_families(self):
        f = TestFunctionSpec("exp_sin", 1.0)
        self.assertEqual(f.family, TestFunctionFamily.exp_sin)
        self.assertEqual(f.label, "exp_sin(1.0)")
        self.assertAlmostEqual(float(f(0.0)), 1.0, places=15)
        self.assertAlmostEqual(float(TestFunctionSpec(TestFunctionFamily.exp_tanh, 2.0).log(100.0)), 2.0, places=12)
        self.assertAlmostEqual(float(TestFunctionSpec(TestFunctionFamily.constant, 2.0)(5.0)), 2.0, places=15)

    def test_rejects(self):
        with self.assertRaises(ConfigError):
            TestFunctionSpec(TestFunctionFamily.constant, 0.0)
        with self.assertRaises(ValueError):
            TestFunctionSpec("exp_cos", 1.0)
