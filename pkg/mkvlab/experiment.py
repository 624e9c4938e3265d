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

"""JSON experiment configs: schema, built-in defaults and typed accessors."""

import copy
from dataclasses import dataclass
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import jsonschema
from jsonschema.exceptions import best_match
import numpy as np

from mkvlab.config import ConfigError, Settings
from mkvlab.constants import *
from mkvlab.gaussian_flow import GaussianState
from mkvlab.metrics import EmpiricalMeasure
from mkvlab.model_core import CklsParams, LabError, VasicekParams
from mkvlab.particle_engine import InitialLaw, SimConfig

_number = {"type": "number"}
_positive = {"type": "number", "exclusiveMinimum": 0}
_non_negative = {"type": "number", "minimum": 0}

def _record(properties: Dict[str, Any], required: Sequence[str] = ()) -> Dict[str, Any]:
    return {"type": "object", "properties": properties, "required": list(required), "additionalProperties": False}

def _list_of(item: Dict[str, Any]) -> Dict[str, Any]:
    return {"type": "array", "items": item, "minItems": 1}

_ckls = _record({"alpha": _number, "delta": _number, "gamma": _number, "theta": _number},
                ("alpha", "delta", "gamma", "theta"))

_functional = _record({
    "kind": {"enum": [i.value for i in FunctionalKind]},
    "a": _number,
    "c": _number,
}, ("kind",))

_vasicek = _record({
    "gamma_drift": _number,
    "beta": _number,
    "b": _functional,
    "sigma": _functional,
    "lip_b": _non_negative,
    "lip_sigma": _non_negative,
    "k_bound": {"type": "number", "minimum": 1},
}, ("gamma_drift", "beta", "sigma", "k_bound"))

_law = {
    "oneOf": [
        _record({"dirac": _number}, ("dirac",)),
        _record({"gaussian": _record({"mean": _number, "variance": _non_negative}, ("mean", "variance"))},
                ("gaussian",)),
        _record({"samples": _list_of(_number)}, ("samples",)),
        _record({"csv": {"type": "string", "minLength": 1}}, ("csv",)),
    ]
}

_law_pair = _record({"a": _law, "b": _law}, ("a", "b"))

_simulation = _record({
    "n_particles": {"type": "integer", "minimum": 1},
    "dt": _positive,
    "horizon": _positive,
    "snapshot_times": {"type": "array", "items": _non_negative},
    "scheme": {"enum": [i.value for i in Scheme]},
    "mean_field_mode": {"enum": [i.value for i in MeanFieldMode]},
    "deterministic_mode": {"type": "boolean"},
})

_test_function = _record({
    "family": {"enum": [i.value for i in TestFunctionFamily]},
    "c": _number,
}, ("family", "c"))

SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "mkvlab experiment",
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "experiment": {"enum": [i.value for i in ExperimentKind]},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "ckls": _ckls,
        "ckls_cases": _list_of(_ckls),
        "vasicek": _vasicek,
        "vasicek_cases": _list_of(_vasicek),
        "simulation": _simulation,
        "initial": _law_pair,
        "initial_pairs": _list_of(_law_pair),
        "test_functions": _list_of(_test_function),
        "horizons": _list_of(_positive),
        "epsilons": _list_of({"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}),
        "k_values": _list_of({"type": "number", "minimum": 1}),
        "grid_points": {"type": "integer", "minimum": 3},
        "zeta_l2": _non_negative,
        "burn_in": _non_negative,
        "sample_horizon": _positive,
        "sample_every": _positive,
        "quadrature_order": {"type": "integer", "minimum": 2},
        "flow_dt": _positive,
        "output": _record({
            "directory": {"type": "string", "minLength": 1},
            "series": {"enum": [i.value for i in SeriesMode]},
        }),
    },
    "required": ["schema_version"],
    "additionalProperties": False,
}

_acceptance_ckls = {"alpha": 1.0, "delta": 1.0, "gamma": 0.25, "theta": 0.5}

_defaults = {
    ExperimentKind.simulate_ckls: {
        "ckls": {"alpha": 1.0, "delta": 1.0, "gamma": 0.5, "theta": 0.75},
        "simulation": {"n_particles": 100000, "dt": 1e-3, "horizon": 2.0,
                       "snapshot_times": [0.0, 0.5, 1.0, 2.0], "mean_field_mode": "empirical"},
        "initial": {"a": {"dirac": 1.0}, "b": {"dirac": 1.0}},
    },
    ExperimentKind.simulate_vasicek: {
        "vasicek": {"gamma_drift": 0.5, "beta": 1.0, "b": {"kind": "affine_in_mean", "a": 0.2, "c": 0.0},
                    "sigma": {"kind": "constant", "c": 1.0}, "lip_b": 0.2, "lip_sigma": 0.0, "k_bound": 2.0},
        "simulation": {"n_particles": 100000, "dt": 1e-3, "horizon": 1.0,
                       "snapshot_times": [0.0, 0.25, 0.5, 1.0], "scheme": "abs_euler",
                       "mean_field_mode": "empirical"},
        "initial": {"a": {"gaussian": {"mean": 0.0, "variance": 1.0}}, "b": {"dirac": 0.0}},
        "flow_dt": 1e-3,
    },
    ExperimentKind.verify_harnack_ckls: {
        "ckls_cases": [dict(_acceptance_ckls, theta=0.5), dict(_acceptance_ckls, theta=0.75)],
        "horizons": [0.5, 1.0, 2.0],
        "test_functions": [{"family": "exp_sin", "c": 1.0}, {"family": "exp_tanh", "c": 2.0}],
        "initial": {"a": {"dirac": 1.0}, "b": {"dirac": 2.0}},
        "simulation": {"n_particles": 100000, "dt": 1e-3, "horizon": 1.0},
    },
    ExperimentKind.verify_harnack_vasicek: {
        "vasicek_cases": [
            {"gamma_drift": 0.0, "beta": 1.0, "b": {"kind": "affine_in_mean", "a": 0.1, "c": 0.0},
             "sigma": {"kind": "affine_in_std", "a": 0.1, "c": 1.0}, "lip_b": 0.1, "lip_sigma": 0.1, "k_bound": 2.0},
            {"gamma_drift": 0.0, "beta": 1.0, "b": {"kind": "constant", "c": 0.0},
             "sigma": {"kind": "constant", "c": 1.0}, "lip_b": 0.0, "lip_sigma": 0.0, "k_bound": 2.0},
        ],
        "initial_pairs": [
            {"a": {"dirac": 0.0}, "b": {"dirac": 1.0}},
            {"a": {"gaussian": {"mean": 0.0, "variance": 1.0}}, "b": {"gaussian": {"mean": 1.0, "variance": 0.5}}},
        ],
        "horizons": [0.5, 1.0, 2.0],
        "test_functions": [{"family": "exp_sin", "c": 1.0}, {"family": "exp_tanh", "c": 2.0}],
        "quadrature_order": 96,
        "flow_dt": 1e-3,
    },
    ExperimentKind.verify_w1_contraction: {
        "ckls": dict(_acceptance_ckls),
        "initial": {"a": {"dirac": 0.5}, "b": {"dirac": 2.0}},
        "simulation": {"n_particles": 100000, "dt": 1e-3, "horizon": 5.0,
                       "snapshot_times": [0.5 * i for i in range(11)]},
    },
    ExperimentKind.verify_w2_entropy_contraction: {
        "vasicek": {"gamma_drift": 0.0, "beta": 1.0, "b": {"kind": "affine_in_mean", "a": 0.2, "c": 0.0},
                    "sigma": {"kind": "affine_in_std", "a": 0.1, "c": 1.0}, "lip_b": 0.2, "lip_sigma": 0.1,
                    "k_bound": 2.0},
        "initial": {"a": {"gaussian": {"mean": 0.0, "variance": 1.0}}, "b": {"gaussian": {"mean": 2.0, "variance": 1.0}}},
        "horizons": [8.0],
        "grid_points": 81,
        "flow_dt": 1e-3,
    },
    ExperimentKind.verify_inverse_moment: {
        "ckls_cases": [{"alpha": 1.0, "delta": 0.0, "gamma": 0.0, "theta": 0.75},
                       {"alpha": 1.0, "delta": 0.0, "gamma": 0.0, "theta": 0.5}],
        "initial": {"a": {"dirac": 1.0}, "b": {"dirac": 1.0}},
        "simulation": {"n_particles": 100000, "dt": 1e-3, "horizon": 1.0},
        "zeta_l2": 0.0,
    },
    ExperimentKind.verify_yw: {
        "epsilons": [0.5, 0.1, 0.01],
        "grid_points": 1000,
    },
    ExperimentKind.verify_lemma_ine: {
        "k_values": [1.0, 1.5, 2.0, 5.0, 10.0],
        "grid_points": 1000,
    },
    ExperimentKind.stationary_ckls: {
        "ckls": dict(_acceptance_ckls),
        "initial": {"a": {"dirac": 1.0}, "b": {"dirac": 1.0}},
        "simulation": {"n_particles": 20000, "dt": 2e-3, "horizon": 1.0, "mean_field_mode": "empirical"},
        "burn_in": 10.0,
        "sample_horizon": 5.0,
        "sample_every": 1.0,
    },
}

_common_defaults = {
    "seed": 20240917,
    "test_functions": [{"family": "exp_sin", "c": 1.0}],
    "horizons": [1.0],
    "grid_points": 101,
    "zeta_l2": 0.0,
    "quadrature_order": 64,
    "flow_dt": 1e-3,
    "output": {},
}


@dataclass(frozen=True)
class TestFunctionSpec:
    """Bounded, strictly positive test functions f."""

    family : TestFunctionFamily
    c : float

    def __post_init__(self):
        if not isinstance(self.family, TestFunctionFamily):
            object.__setattr__(self, "family", TestFunctionFamily(self.family))
        object.__setattr__(self, "c", float(self.c))
        if not math.isfinite(self.c):
            raise ConfigError(f"Test function parameter must be finite, got {self.c}")
        if self.family == TestFunctionFamily.constant and not self.c > 0.0:
            raise ConfigError(f"constant test functions need c > 0, got {self.c}")

    @property
    def label(self) -> str:
        return f"{self.family.value}({self.c!r})"

    def log(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == TestFunctionFamily.exp_sin:
            return self.c * np.sin(x)
        elif self.family == TestFunctionFamily.exp_tanh:
            return self.c * np.tanh(x)
        else:
            return np.full(x.shape, math.log(self.c))

    def __call__(self, x):
        return np.exp(self.log(x))


def _json_path(error: jsonschema.ValidationError) -> str:
    path = "$"
    for part in error.absolute_path:
        path += f"[{part}]" if isinstance(part, int) else f".{part}"
    return path

def validate_document(document: Any) -> None:
    validator = jsonschema.Draft7Validator(SCHEMA)
    error = best_match(validator.iter_errors(document))
    if error is not None:
        raise ConfigError(f"{_json_path(error)}: {error.message}")

def defaults_for(kind: ExperimentKind) -> Dict[str, Any]:
    data = copy.deepcopy(_common_defaults)
    data.update(copy.deepcopy(_defaults[kind]))
    data["schema_version"] = SCHEMA_VERSION
    return data


@dataclass(frozen=True)
class ExperimentConfig:
    kind : ExperimentKind
    data : Dict[str, Any]

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def series_mode(self) -> Optional[SeriesMode]:
        value = self.data.get("output", {}).get("series")
        return SeriesMode(value) if value else None

    @property
    def output_directory(self) -> Optional[Path]:
        value = self.data.get("output", {}).get("directory")
        return Path(value).expanduser() if value else None

    def _require(self, key: str) -> Any:
        try:
            return self.data[key]
        except KeyError:
            raise ConfigError(f"$.{key}: required by {self.kind.value}")

    def ckls(self) -> CklsParams:
        return CklsParams.from_dict(self._require("ckls"))

    def ckls_cases(self) -> List[CklsParams]:
        if "ckls_cases" in self.data:
            return [CklsParams.from_dict(i) for i in self.data["ckls_cases"]]
        return [self.ckls()]

    def vasicek(self) -> VasicekParams:
        return VasicekParams.from_dict(self._require("vasicek"))

    def vasicek_cases(self) -> List[VasicekParams]:
        if "vasicek_cases" in self.data:
            return [VasicekParams.from_dict(i) for i in self.data["vasicek_cases"]]
        return [self.vasicek()]

    def sim_config(self, settings: Optional[Settings] = None, **overrides) -> SimConfig:
        data = dict(self._require("simulation"))
        data["seed"] = self.seed
        if settings is not None:
            data.update(chunk_size=settings.chunk_size, threads=settings.threads, progress=settings.progress)
        try:
            return SimConfig.from_dict(data, **overrides)
        except LabError as e:
            raise ConfigError(f"$.simulation: {e}")

    def law(self, side: str = "a") -> InitialLaw:
        return parse_law(self._require("initial")[side], f"$.initial.{side}")

    def law_pairs(self) -> List[Tuple[InitialLaw, InitialLaw]]:
        if "initial_pairs" in self.data:
            return [(parse_law(p["a"], f"$.initial_pairs[{i}].a"), parse_law(p["b"], f"$.initial_pairs[{i}].b"))
                    for i, p in enumerate(self.data["initial_pairs"])]
        return [(self.law("a"), self.law("b"))]

    def test_functions(self) -> List[TestFunctionSpec]:
        return [TestFunctionSpec(i["family"], i["c"]) for i in self.data["test_functions"]]

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.data, experiment=self.kind.value)


def parse_law(data: Dict[str, Any], where: str = "$") -> InitialLaw:
    if "dirac" in data:
        return float(data["dirac"])
    if "gaussian" in data:
        return GaussianState(data["gaussian"]["mean"], data["gaussian"]["variance"])
    if "samples" in data:
        return EmpiricalMeasure.from_samples(data["samples"])
    try:
        return EmpiricalMeasure.from_csv(Path(data["csv"]).expanduser())
    except (OSError, LabError) as e:
        raise ConfigError(f"{where}.csv: {e}")

def make_config(kind: ExperimentKind, document: Optional[Dict[str, Any]] = None,
                seed: Optional[int] = None, out: Optional[Path] = None) -> ExperimentConfig:
    """Defaults of the experiment kind, overridden key by key from a validated document."""
    data = defaults_for(kind)
    if document is not None:
        validate_document(document)
        declared = document.get("experiment")
        if declared is not None and declared != kind.value:
            raise ConfigError(f"$.experiment: config is for '{declared}', not '{kind.value}'")
        data.update((k, copy.deepcopy(v)) for k, v in document.items() if k != "experiment")
    if seed is not None:
        if not 0 <= seed < 2**64:
            raise ConfigError(f"$.seed: {seed} is not a 64-bit unsigned integer")
        data["seed"] = seed
    if out is not None:
        data["output"] = dict(data.get("output", {}), directory=str(out))
    logging.debug(f"Experiment {kind.value}: {data}")
    return ExperimentConfig(kind, data)

def load_config(kind: ExperimentKind, path: Optional[Path], seed: Optional[int] = None,
                out: Optional[Path] = None) -> ExperimentConfig:
    document = None
    if path is not None:
        logging.info(f"Reading experiment config '{path}'...")
        try:
            with path.open("r", encoding="utf-8") as fp:
                document = json.load(fp)
        except json.JSONDecodeError as e:
            raise ConfigError(f"'{path}' is not valid JSON (line {e.lineno}, column {e.colno}): {e.msg}")
        except OSError as e:
            raise ConfigError(f"Could not read '{path}': {e}")
    return make_config(kind, document, seed, out)
