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

"""Interacting particle simulation of the mean-field CKLS and Vasicek models.

Noise is drawn from counter-based Philox streams. Particle i belongs to chunk i // chunk_size
and the normals of chunk c at step k come from the key derived from the master seed with the
counter (0, 0, c, k), so the draws never depend on how chunks are scheduled on workers.
"""

import concurrent.futures
from dataclasses import dataclass, field
import logging
import math
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats
import tqdm.contrib.logging as tqdm_logging

from mkvlab.constants import *
from mkvlab.gaussian_flow import GaussianState
from mkvlab.metrics import EmpiricalMeasure
from mkvlab.model_core import CklsParams, DomainError, InvalidParameter, LabError, VasicekParams, exact_mean
from mkvlab.utils import derive_key, thread_count

InitialLaw = Union[float, EmpiricalMeasure, GaussianState]

class NonFiniteState(LabError):
    def __init__(self, step: int, time: float, bad: int, first_index: int, last_mean: float):
        super().__init__(f"{bad} particle(s) became non-finite at step {step} (t={time!r}), "
                         f"first at index {first_index}; last finite ensemble mean {last_mean!r}")
        self.step = step
        self.time = time
        self.bad = bad
        self.first_index = first_index
        self.last_mean = last_mean


class SizeMismatch(LabError):
    pass


class AllStatesFloored(LabError):
    pass


@dataclass(frozen=True)
class SimConfig:
    n_particles : int
    dt : float
    horizon : float
    snapshot_times : Tuple[float, ...] = ()
    scheme : Scheme = Scheme.abs_euler_projected
    mean_field_mode : MeanFieldMode = MeanFieldMode.exact_mean
    deterministic_mode : bool = False
    seed : int = 0
    chunk_size : int = DEFAULT_CHUNK_SIZE

    # Execution only, never changes results.
    threads : Optional[int] = field(default=None, compare=False)
    progress : bool = field(default=False, compare=False)

    def __post_init__(self):
        if not isinstance(self.scheme, Scheme):
            object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not isinstance(self.mean_field_mode, MeanFieldMode):
            object.__setattr__(self, "mean_field_mode", MeanFieldMode(self.mean_field_mode))
        if int(self.n_particles) < 1:
            raise InvalidParameter(f"n_particles must be >= 1, got {self.n_particles}")
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise InvalidParameter(f"dt must be > 0, got {self.dt}")
        if not (self.horizon > 0.0 and math.isfinite(self.horizon)):
            raise InvalidParameter(f"horizon must be > 0, got {self.horizon}")
        if self.dt > self.horizon:
            raise InvalidParameter(f"dt={self.dt} exceeds the horizon {self.horizon}")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidParameter(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if int(self.chunk_size) < 1:
            raise InvalidParameter(f"chunk_size must be >= 1, got {self.chunk_size}")
        object.__setattr__(self, "n_particles", int(self.n_particles))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "chunk_size", int(self.chunk_size))

        times = tuple(float(i) for i in self.snapshot_times) or (0.0, self.horizon)
        for t in times:
            if not 0.0 <= t <= self.horizon:
                raise InvalidParameter(f"Snapshot time {t} lies outside [0, {self.horizon}]")
        object.__setattr__(self, "snapshot_times", tuple(sorted(set(times))))

    def _snap(self, t: float) -> int:
        # Nearest grid node, ties rounded up.
        return int(math.floor(t / self.dt + 0.5))

    @property
    def n_steps(self) -> int:
        return self._snap(self.horizon)

    @property
    def snapshot_steps(self) -> Tuple[int, ...]:
        steps = sorted({min(self._snap(t), self.n_steps) for t in self.snapshot_times})
        return tuple(steps)

    @classmethod
    def from_dict(cls, data: Dict[str, Any], **overrides) -> "SimConfig":
        kwargs = dict(data)
        kwargs.update((k, v) for k, v in overrides.items() if v is not None)
        if "snapshot_times" in kwargs:
            kwargs["snapshot_times"] = tuple(kwargs["snapshot_times"])
        try:
            return cls(**kwargs)
        except TypeError as e:
            raise InvalidParameter(f"Bad simulation settings: {e}")
        except ValueError as e:
            raise InvalidParameter(str(e))

    def to_dict(self) -> Dict[str, Any]:
        return dict(n_particles=self.n_particles, dt=self.dt, horizon=self.horizon,
                    snapshot_times=list(self.snapshot_times), scheme=self.scheme.value,
                    mean_field_mode=self.mean_field_mode.value,
                    deterministic_mode=self.deterministic_mode, seed=self.seed,
                    chunk_size=self.chunk_size)


@dataclass(frozen=True)
class ParticleEnsemble:
    states : np.ndarray
    time : float
    step : int
    seed : int

    def __post_init__(self):
        self.states.setflags(write=False)

    @property
    def n(self) -> int:
        return self.states.size

    @property
    def stream(self) -> Tuple[int, int]:
        return self.seed, self.step

    def mean(self) -> float:
        return float(self.states.mean())

    def variance(self) -> float:
        return float(self.states.var())

    def mean_stderr(self) -> float:
        if self.n < 2:
            return 0.0
        return float(self.states.std(ddof=1) / math.sqrt(self.n))

    def variance_stderr(self) -> float:
        """Delta-method standard error of the (biased) sample variance."""
        if self.n < 2:
            return 0.0
        centered = self.states - self.states.mean()
        m4 = float(np.mean(centered ** 4))
        m2 = float(np.mean(centered ** 2))
        return math.sqrt(max(m4 - m2 * m2, 0.0) / self.n)

    def to_measure(self) -> EmpiricalMeasure:
        return EmpiricalMeasure.from_samples(self.states)

    def summary(self) -> Tuple[float, ...]:
        q05, q50, q95 = np.quantile(self.states, (0.05, 0.5, 0.95))
        return (self.time, self.mean(), self.variance(), float(self.states.min()),
                float(q05), float(q50), float(q95), float(self.states.max()))


@dataclass(frozen=True)
class CoupledTrajectory:
    snapshots_a : List[ParticleEnsemble]
    snapshots_b : List[ParticleEnsemble]
    distances : Tuple[float, ...]
    distance_stderrs : Tuple[float, ...]

    @property
    def times(self) -> Tuple[float, ...]:
        return tuple(i.time for i in self.snapshots_a)


class InverseMomentEstimate(NamedTuple):
    estimate: float
    stderr: float
    floored_fraction: float
    floored_share: float


class InverseMomentIntegral:
    """Accumulates the pathwise integral of max(X_t, floor)^(-2 theta) by the left-point rule."""

    def __init__(self, theta: float, floor: float = DEFAULT_INVERSE_MOMENT_FLOOR, ensemble: int = 0):
        if not floor > 0.0:
            raise InvalidParameter(f"The inverse-moment floor must be > 0, got {floor}")
        self.theta = theta
        self.floor = floor
        self.ensemble = ensemble
        self._integrals = None
        self._floored_integrals = None
        self._floored_samples = 0
        self._samples = 0

    def observe(self, time: float, dt: float, states: Sequence[np.ndarray]) -> None:
        x = states[self.ensemble]
        if self._integrals is None:
            self._integrals = np.zeros(x.size)
            self._floored_integrals = np.zeros(x.size)
        floored = x < self.floor
        values = np.power(np.maximum(x, self.floor), -2.0 * self.theta) * dt
        self._integrals += values
        self._floored_integrals += np.where(floored, values, 0.0)
        self._floored_samples += int(floored.sum())
        self._samples += x.size

    def result(self) -> InverseMomentEstimate:
        if self._integrals is None:
            raise LabError("No states were observed")
        n = self._integrals.size
        estimate = float(self._integrals.mean())
        stderr = float(self._integrals.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        floored_mass = float(self._floored_integrals.mean())
        share = floored_mass / estimate if estimate > 0.0 else 0.0
        fraction = self._floored_samples / self._samples
        if share > 0.5:
            raise AllStatesFloored(
                f"{share:.1%} of the inverse-moment estimate comes from states below the floor {self.floor!r}"
            )
        if fraction:
            logging.warning(f"Inverse moment: {fraction:.3%} of samples sat below the floor "
                            f"({share:.3%} of the estimate)")
        return InverseMomentEstimate(estimate, stderr, fraction, share)


class _CklsKernel:
    def __init__(self, params: CklsParams, cfg: SimConfig, law_means: Sequence[float]):
        self.params = params
        self.cfg = cfg
        self.law_means = law_means
        self.sqrt_dt = math.sqrt(cfg.dt)

    def context(self, index: int, time: float, x: np.ndarray) -> float:
        if self.cfg.mean_field_mode == MeanFieldMode.exact_mean:
            return exact_mean(self.params, self.law_means[index], time)
        return float(x.mean())

    def advance(self, x: np.ndarray, z: np.ndarray, mean: float) -> None:
        p = self.params
        if p.theta == 0.5:
            diffusion = np.sqrt(np.abs(x))
        else:
            diffusion = np.power(np.abs(x), p.theta)
        x += (p.alpha - p.delta * x + p.gamma * mean) * self.cfg.dt + diffusion * (self.sqrt_dt * z)
        if self.cfg.scheme == Scheme.abs_euler_projected:
            np.maximum(x, 0.0, out=x)


class _VasicekKernel:
    def __init__(self, params: VasicekParams, cfg: SimConfig):
        self.params = params
        self.cfg = cfg
        self.sqrt_dt = math.sqrt(cfg.dt)

    def context(self, index: int, time: float, x: np.ndarray) -> Tuple[float, float]:
        m, v = float(x.mean()), float(x.var())
        self.params.sigma_squared(m, v)
        return float(self.params.b_fn(m, v)), float(self.params.sigma_fn(m, v))

    def advance(self, x: np.ndarray, z: np.ndarray, coefficients: Tuple[float, float]) -> None:
        b, sigma = coefficients
        p = self.params
        x += (p.gamma_drift - p.beta * x + b) * self.cfg.dt + sigma * self.sqrt_dt * z


def _noise(key: int, step: int, chunk: int, size: int) -> np.ndarray:
    counter = np.array([0, 0, chunk, step], dtype=np.uint64)
    generator = np.random.Generator(np.random.Philox(key=key, counter=counter))
    return generator.standard_normal(size)

def initial_states(init: InitialLaw, n: int) -> Tuple[np.ndarray, float]:
    """N particle positions for an initial law and the law's exact mean.

    Non-atomic laws are discretized on the quantile grid (i + 1/2)/N.
    """
    grid = (np.arange(n) + 0.5) / n
    if isinstance(init, EmpiricalMeasure):
        if init.size == n and init.is_uniform:
            return np.array(init.atoms, dtype=float), init.mean()
        return np.array(init.quantile(grid), dtype=float), init.mean()
    if isinstance(init, GaussianState):
        spread = math.sqrt(init.variance) * stats.norm.ppf(grid)
        return init.mean + spread, init.mean
    x = float(init)
    return np.full(n, x), x

def _run(kernel, initials: Sequence[np.ndarray], cfg: SimConfig, key: int,
         observers: Sequence = (), desc: str = "Stepping") -> List[List[ParticleEnsemble]]:
    states = [np.array(i, dtype=float) for i in initials]
    n = cfg.n_particles
    chunks = [slice(i, min(i + cfg.chunk_size, n)) for i in range(0, n, cfg.chunk_size)]
    wanted = set(cfg.snapshot_steps)
    snapshots = [[] for _ in states]
    last_means = [float(x.mean()) for x in states]

    def record(step: int) -> None:
        for series, x in zip(snapshots, states):
            series.append(ParticleEnsemble(x.copy(), step * cfg.dt, step, cfg.seed))

    def advance_chunk(step: int, chunk: int, contexts) -> None:
        sl = chunks[chunk]
        if cfg.deterministic_mode:
            z = np.zeros(sl.stop - sl.start)
        else:
            z = _noise(key, step, chunk, sl.stop - sl.start)
        # One draw drives every ensemble: synchronous coupling.
        for x, ctx in zip(states, contexts):
            kernel.advance(x[sl], z, ctx)

    if 0 in wanted:
        record(0)

    ncpus = thread_count(cfg.threads)
    logging.debug(f"{desc}: {cfg.n_steps} steps, {n} particles in {len(chunks)} chunk(s), workers={ncpus or 'auto'}")
    progress = tqdm_logging.tqdm_logging_redirect(
        range(cfg.n_steps),
        desc=desc,
        unit="step",
        leave=False,
        disable=not cfg.progress
    )
    with progress as progress, concurrent.futures.ThreadPoolExecutor(max_workers=ncpus) as executor:
        for step in progress:
            time = step * cfg.dt
            for observer in observers:
                observer.observe(time, cfg.dt, states)
            contexts = [kernel.context(i, time, x) for i, x in enumerate(states)]
            logging.trace(f"step {step}: {contexts}")
            futures = [executor.submit(advance_chunk, step, c, contexts) for c in range(len(chunks))]
            for future in futures:
                future.result()

            for i, x in enumerate(states):
                finite = np.isfinite(x)
                if not finite.all():
                    bad = np.flatnonzero(~finite)
                    raise NonFiniteState(step + 1, (step + 1) * cfg.dt, bad.size, int(bad[0]), last_means[i])
                last_means[i] = float(x.mean())
            if step + 1 in wanted:
                record(step + 1)
    return snapshots

def _ckls_initial(init: InitialLaw, n: int) -> Tuple[np.ndarray, float]:
    x, m0 = initial_states(init, n)
    if np.any(x < 0.0):
        raise DomainError("CKLS initial laws must be supported on [0, inf)")
    return x, m0

def simulate_ckls(params: CklsParams, init: InitialLaw, cfg: SimConfig,
                  observers: Sequence = (), stream: int = STREAM_PRIMARY) -> List[ParticleEnsemble]:
    logging.info(f"Simulating CKLS ensemble ({cfg.n_particles} particles to T={cfg.horizon})...")
    x0, m0 = _ckls_initial(init, cfg.n_particles)
    kernel = _CklsKernel(params, cfg, (m0,))
    key = derive_key(cfg.seed, stream)
    return _run(kernel, (x0,), cfg, key, observers, "Simulating CKLS")[0]

def simulate_coupled_ckls(params: CklsParams, init_a: InitialLaw, init_b: InitialLaw,
                          cfg: SimConfig, stream: int = STREAM_PRIMARY) -> CoupledTrajectory:
    for init in (init_a, init_b):
        if isinstance(init, EmpiricalMeasure) and init.size not in (1, cfg.n_particles):
            raise SizeMismatch(f"Coupled initial laws need {cfg.n_particles} atoms, got {init.size}")
    logging.info(f"Simulating coupled CKLS ensembles ({cfg.n_particles} pairs to T={cfg.horizon})...")
    xa, ma = _ckls_initial(init_a, cfg.n_particles)
    xb, mb = _ckls_initial(init_b, cfg.n_particles)
    if xa.size != xb.size:
        raise SizeMismatch(f"Coupled ensembles differ in size: {xa.size} vs {xb.size}")

    kernel = _CklsKernel(params, cfg, (ma, mb))
    key = derive_key(cfg.seed, stream)
    series_a, series_b = _run(kernel, (xa, xb), cfg, key, (), "Simulating coupled CKLS")

    distances, stderrs = [], []
    for a, b in zip(series_a, series_b):
        gap = np.abs(a.states - b.states)
        distances.append(float(gap.mean()))
        stderrs.append(float(gap.std(ddof=1) / math.sqrt(gap.size)) if gap.size > 1 else 0.0)
    return CoupledTrajectory(series_a, series_b, tuple(distances), tuple(stderrs))

def estimate_inverse_moment(trajectory: Sequence[ParticleEnsemble], theta: float,
                            floor: float = DEFAULT_INVERSE_MOMENT_FLOOR) -> InverseMomentEstimate:
    """Left-point estimate of E int X_t^(-2 theta) dt over the span of the snapshots."""
    if len(trajectory) < 2:
        raise LabError("An inverse-moment estimate needs at least two snapshots")
    integral = InverseMomentIntegral(theta, floor)
    for current, following in zip(trajectory, trajectory[1:]):
        if following.n != current.n:
            raise SizeMismatch(f"Snapshot sizes differ: {current.n} vs {following.n}")
        integral.observe(current.time, following.time - current.time, (current.states,))
    return integral.result()

def simulate_vasicek_particles(params: VasicekParams, init: InitialLaw, cfg: SimConfig,
                               stream: int = STREAM_PRIMARY) -> List[ParticleEnsemble]:
    # The Vasicek law charges the whole line: no projection, and the interaction is always
    # through the empirical moments.
    if cfg.scheme != Scheme.abs_euler or cfg.mean_field_mode != MeanFieldMode.empirical:
        logging.debug("Vasicek particles ignore the scheme and mean-field mode settings")
    logging.info(f"Simulating Vasicek particles ({cfg.n_particles} particles to T={cfg.horizon})...")
    x0, _ = initial_states(init, cfg.n_particles)
    kernel = _VasicekKernel(params, cfg)
    key = derive_key(cfg.seed, stream)
    return _run(kernel, (x0,), cfg, key, (), "Simulating Vasicek")[0]
