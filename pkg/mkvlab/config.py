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

import configparser
from dataclasses import dataclass, fields
import logging
from pathlib import Path
from typing import Any, Dict, Iterator, Optional

from mkvlab.constants import *
from mkvlab.model_core import LabError

class ConfigError(LabError):
    pass


@dataclass(frozen=True)
class _Setting:
    default : str
    kind : str
    help : str = ""

    def render(self, name: str) -> Iterator[str]:
        if self.help:
            for line in self.help.split("\n"):
                yield f"; {line}"
        yield f"; ({self.kind}, default {self.default})"
        yield f"{name} = {self.default}"


_defaults = {
    "output": {
        "directory": _Setting("./mkvlab-out", "path",
            "Directory that receives report.json, series.csv and manifest.json. Overridden by --out."),

        "series": _Setting("summary", "series mode",
            "Particle snapshot output: \"summary\" writes one row of moments and quantiles per snapshot,\n"
            "\"full\" writes one row per particle (time, particle_index, state). Full output of large\n"
            "ensembles is big!"),
    },

    "simulation": {
        "threads": _Setting("0", "integer",
            "Worker threads stepping particle chunks. 0 picks a count automatically. The MKVLAB_THREADS\n"
            "environment variable caps this value. Results never depend on it."),

        "chunk_size": _Setting(str(DEFAULT_CHUNK_SIZE), "integer",
            "Particles per random number stream. Changing this changes every simulated path, so keep\n"
            "it fixed for runs that are expected to reproduce each other."),

        "inverse_moment_floor": _Setting(repr(DEFAULT_INVERSE_MOMENT_FLOOR), "float",
            "States below this value are floored when integrating X^(-2 theta). The floored share of\n"
            "the estimate is always reported."),

        "progress": _Setting("false", "boolean", "Show progress bars while stepping ensembles."),
    },

    "verification": {
        "mc_sigmas": _Setting("3.0", "float", "Monte Carlo checks pass within this many standard errors."),
        "flow_tolerance": _Setting("1e-8", "float", "Absolute tolerance for checks on exact Gaussian flows."),
        "mc_rate_slack": _Setting("0.05", "float", "Allowed shortfall of fitted decay rates from particle simulations."),
        "flow_rate_slack": _Setting("1e-3", "float", "Allowed shortfall of fitted decay rates from Gaussian flows."),
        "wet_tolerance": _Setting("1e-6", "float", "Absolute tolerance of the pointwise W2 contraction check."),
        "confidence_z": _Setting("2.326", "float", "One-sided normal quantile for confidence bounds (2.326 is 99%)."),
        "floored_mass_limit": _Setting("1e-3", "float",
            "Largest share of an inverse-moment estimate that may come from floored states before the\n"
            "check is reported as inconclusive."),
    },
}

def _get_path(value):
    if not value:
        return None
    return Path(value).expanduser()

def _get_series_mode(value):
    try:
        return SeriesMode(value.strip().lower())
    except ValueError:
        raise ValueError(f"Unknown series mode '{value}'")

_converters = {
    "dirpath": _get_path,
    "seriesmode": _get_series_mode,
}

_getters = {
    "path": "getdirpath",
    "series mode": "getseriesmode",
    "integer": "getint",
    "float": "getfloat",
    "boolean": "getboolean",
}

_header = """
;    mkvlab tool settings
;
;    Experiment parameters live in JSON experiment configs (see `mkvlab --emit-schema`).
;    This file only controls where output goes, how work is scheduled and the acceptance
;    tolerances of the verification commands. Unknown sections or options are errors.

"""


@dataclass(frozen=True)
class Tolerances:
    mc_sigmas : float = 3.0
    flow_tolerance : float = 1e-8
    mc_rate_slack : float = 0.05
    flow_rate_slack : float = 1e-3
    wet_tolerance : float = 1e-6
    confidence_z : float = 2.326
    floored_mass_limit : float = 1e-3


@dataclass(frozen=True)
class Settings:
    output_directory : Path
    series : SeriesMode
    threads : Optional[int]
    chunk_size : int
    inverse_moment_floor : float
    progress : bool
    tolerances : Tolerances


def dump_default_config(config_path: Path):
    with config_path.open("w") as fp:
        fp.write(_header.lstrip())
        for section, settings in _defaults.items():
            fp.write(f"\n[{section}]\n\n")
            for name, setting in settings.items():
                fp.write("\n".join(setting.render(name)))
                fp.write("\n\n")

def read_config(config_path: Optional[Path]) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(converters=_converters)
    parser.read_dict({section: {k: v.default for k, v in values.items()} for section, values in _defaults.items()})
    if config_path is not None and config_path.is_file():
        logging.debug(f"Reading settings from '{config_path}'")
        parser.read(config_path)
    elif config_path is not None:
        logging.debug(f"No settings file at '{config_path}', using defaults")
    return parser

def _typed_values(parser: configparser.ConfigParser) -> Dict[str, Dict[str, Any]]:
    for section in parser.sections():
        if section not in _defaults:
            raise ConfigError(f"Unknown settings section [{section}]")
        unknown = sorted(set(parser.options(section)) - set(_defaults[section]))
        if unknown:
            raise ConfigError(f"Unknown option(s) in [{section}]: {', '.join(unknown)}")

    values = {}
    for section, settings in _defaults.items():
        for name, setting in settings.items():
            getter = getattr(parser, _getters[setting.kind])
            try:
                values.setdefault(section, {})[name] = getter(section, name)
            except (ValueError, configparser.Error) as e:
                raise ConfigError(f"{section}.{name} must be a {setting.kind}, got '{parser.get(section, name)}' ({e})")
    return values

def load_settings(parser: configparser.ConfigParser) -> Settings:
    values = _typed_values(parser)
    simulation = values["simulation"]
    settings = Settings(
        output_directory=values["output"]["directory"],
        series=values["output"]["series"],
        threads=simulation["threads"] if simulation["threads"] > 0 else None,
        chunk_size=simulation["chunk_size"],
        inverse_moment_floor=simulation["inverse_moment_floor"],
        progress=simulation["progress"],
        tolerances=Tolerances(**{i.name: values["verification"][i.name] for i in fields(Tolerances)}),
    )
    if settings.chunk_size < 1:
        raise ConfigError(f"simulation.chunk_size must be >= 1, got {settings.chunk_size}")
    if not settings.inverse_moment_floor > 0.0:
        raise ConfigError(f"simulation.inverse_moment_floor must be > 0, got {settings.inverse_moment_floor}")
    return settings

def default_settings() -> Settings:
    return load_settings(read_config(None))
