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

import enum

SCHEMA_VERSION = 1

# Particles per counter-based RNG stream. Draws depend on (seed, chunk, step) only,
# so this must not change between runs that are expected to reproduce.
DEFAULT_CHUNK_SIZE = 16384

DEFAULT_INVERSE_MOMENT_FLOOR = 1e-8

# Offsets (as fractions of the interval length) sampled next to open-interval boundaries.
BOUNDARY_OFFSETS = (1e-3, 1e-6, 1e-9)

# Seed grid size for the infimum searches.
SEED_GRID_POINTS = 1000

# Stream tags mixed into the master seed for independent ensembles.
STREAM_PRIMARY = 0
STREAM_SECONDARY = 1


class Scheme(enum.Enum):
    abs_euler = "abs_euler"
    abs_euler_projected = "abs_euler_projected"


class MeanFieldMode(enum.Enum):
    empirical = "empirical"
    exact_mean = "exact_mean"


class FunctionalKind(enum.Enum):
    constant = "constant"
    affine_in_mean = "affine_in_mean"
    affine_in_std = "affine_in_std"


class TestFunctionFamily(enum.Enum):
    exp_sin = "exp_sin"
    exp_tanh = "exp_tanh"
    constant = "constant"


class SeriesMode(enum.Enum):
    full = "full"
    summary = "summary"


class ContractionKind(enum.Enum):
    w1_ckls = "w1-ckls"
    w2_vasicek = "w2-vasicek"
    entropy_vasicek = "entropy-vasicek"


class ExperimentKind(enum.Enum):
    simulate_ckls = "simulate-ckls"
    simulate_vasicek = "simulate-vasicek"
    verify_harnack_ckls = "verify-harnack-ckls"
    verify_harnack_vasicek = "verify-harnack-vasicek"
    verify_w1_contraction = "verify-w1-contraction"
    verify_w2_entropy_contraction = "verify-w2-entropy-contraction"
    verify_inverse_moment = "verify-inverse-moment"
    verify_yw = "verify-yw"
    verify_lemma_ine = "verify-lemma-ine"
    stationary_ckls = "stationary-ckls"


@enum.unique
class ExitCode(enum.IntEnum):
    success = 0
    check_failed = 1
    config_error = 2
    numerical_error = 3


report_file_name = "report.json"
series_file_name = "series.csv"
trajectory_file_name = "trajectory.csv"
manifest_file_name = "manifest.json"

# Stationary mass below this level counts as absorbed at 0.
absorbed_level = 1e-3

summary_columns = ("time", "mean", "variance", "min", "q05", "q50", "q95", "max")
trajectory_columns = ("time", "mean", "variance", "b_value", "sigma_value")
yw_columns = ("x", "psi", "v", "dv", "d2v")
