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

"""Verification experiments. Each one measures both sides of an estimate and records a Check.

series.csv columns per experiment:
    simulate-ckls, simulate-vasicek, stationary-ckls    particle snapshots (summary or full)
    verify-harnack-ckls        theta, T, f, lhs, log_rhs, addend, stderr, margin
    verify-harnack-vasicek     case, pair, t, f, lhs, log_rhs, addend, margin
    verify-w1-contraction      time, coupled_distance, stderr, w1_empirical, bound
    verify-w2-entropy-contraction    time, w2, w2_bound, entropy_a, entropy_b
    verify-inverse-moment      theta, alpha, estimate, stderr, bound, floored_fraction
    verify-yw                  epsilon, x, psi, v, dv, d2v
    verify-lemma-ine           k, y, lhs, rhs

simulate-vasicek also writes trajectory.csv: time, mean, variance, b_value, sigma_value of the Gaussian flow.
"""

from dataclasses import dataclass, field, replace
import logging
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from mkvlab import bounds
from mkvlab.bounds import BoundReport, HypothesisViolated
from mkvlab.config import ConfigError, Settings, Tolerances, default_settings
from mkvlab.constants import *
from mkvlab.experiment import ExperimentConfig, TestFunctionSpec
from mkvlab import gaussian_flow
from mkvlab.gaussian_flow import DegenerateGaussian, GaussianState
from mkvlab import metrics
from mkvlab.metrics import EmpiricalMeasure
from mkvlab.model_core import CklsParams, LabError, VasicekParams, exact_mean, stationary_mean
from mkvlab import particle_engine
from mkvlab.particle_engine import InitialLaw, InverseMomentIntegral, SimConfig
from mkvlab.reporting import particle_rows
from mkvlab.yamada_watanabe import YwFamily, property_violations

class NotErgodic(LabError):
    pass


@dataclass(frozen=True)
class Check:
    name : str
    passed : bool
    measured : float
    bound : float
    tolerance : float = 0.0
    relation : str = "<="
    details : Dict[str, Any] = field(default_factory=dict)

    @property
    def margin(self) -> float:
        if self.relation == "<=":
            return self.bound - self.measured
        return self.measured - self.bound

    def to_dict(self) -> Dict[str, Any]:
        return dict(name=self.name, passed=self.passed, measured=self.measured, bound=self.bound,
                    tolerance=self.tolerance, relation=self.relation, margin=self.margin,
                    details=dict(self.details))


def _check(name: str, measured: float, bound: float, tolerance: float = 0.0, relation: str = "<=",
           **details) -> Check:
    if relation == "<=":
        passed = measured <= bound + tolerance
    else:
        passed = measured >= bound - tolerance
    log = logging.info if passed else logging.warning
    log(f"{'PASS' if passed else 'FAIL'} {name}: {measured!r} {relation} {bound!r} (tolerance {tolerance!r})")
    return Check(name, bool(passed), float(measured), float(bound), float(tolerance), relation, details)


@dataclass
class ExperimentResult:
    kind : ExperimentKind
    checks : List[Check] = field(default_factory=list)
    bounds : List[BoundReport] = field(default_factory=list)
    columns : Tuple[str, ...] = ()
    rows : List[Sequence[Any]] = field(default_factory=list)
    extra_series : Dict[str, Tuple[Tuple[str, ...], List[Sequence[Any]]]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(i.passed for i in self.checks)

    def report(self, config: ExperimentConfig) -> Dict[str, Any]:
        return {
            "experiment": self.kind.value,
            "schema_version": SCHEMA_VERSION,
            "seed": config.seed,
            "inputs": config.to_dict(),
            "checks": [i.to_dict() for i in self.checks],
            "bounds": [i.to_dict() for i in self.bounds],
            "passed": self.passed,
        }


def _as_measure(law: InitialLaw) -> EmpiricalMeasure:
    if isinstance(law, EmpiricalMeasure):
        return law
    if isinstance(law, GaussianState):
        raise ConfigError("CKLS initial laws must be Dirac or empirical measures on [0, inf)")
    return EmpiricalMeasure.dirac(law)

def _as_gaussian(law: InitialLaw) -> GaussianState:
    if isinstance(law, GaussianState):
        return law
    if isinstance(law, EmpiricalMeasure):
        raise ConfigError("Gaussian flows need Dirac or Gaussian initial laws")
    return GaussianState.dirac(law)


def verify_harnack_ckls(params: CklsParams, x: InitialLaw, y: InitialLaw, horizon: float,
                        functions: Sequence[TestFunctionSpec], mc: SimConfig,
                        tolerances: Tolerances = Tolerances()) -> Tuple[List[Check], BoundReport]:
    """E log f(Y_T) <= log E f(X_T) + addend, X started from mu0 = x and Y from nu0 = y.

    Both flows are simulated once on independent streams with the exact mean in the drift.
    """
    if not params.harnack_ok:
        raise HypothesisViolated(f"The log-Harnack hypotheses fail for {params}")
    mu0, nu0 = _as_measure(x), _as_measure(y)
    if params.theta > 0.5:
        moment = metrics.power_moment(mu0, 1.0 - 2.0 * params.theta)
    else:
        moment = metrics.log_ratio_moment(mu0)
    w2rho = metrics.wasserstein_rho2(mu0, nu0, params.theta)
    w1 = metrics.wasserstein_p(mu0, nu0, 1.0)
    bound = bounds.harnack_addend_ckls(params, horizon, w2rho, w1, moment)

    cfg = replace(mc, horizon=horizon, snapshot_times=(horizon,), mean_field_mode=MeanFieldMode.exact_mean)
    x_states = particle_engine.simulate_ckls(params, mu0, cfg, stream=STREAM_PRIMARY)[-1].states
    y_states = particle_engine.simulate_ckls(params, nu0, cfg, stream=STREAM_SECONDARY)[-1].states
    root_n = math.sqrt(cfg.n_particles)

    checks = []
    for fn in functions:
        fx = fn(x_states)
        mean_f = float(fx.mean())
        log_rhs = math.log(mean_f)
        # Delta method: se(log mean) = se(mean) / mean.
        se_rhs = float(fx.std(ddof=1)) / root_n / mean_f if fx.size > 1 else 0.0
        log_fy = fn.log(y_states)
        lhs = float(log_fy.mean())
        se_lhs = float(log_fy.std(ddof=1)) / root_n if log_fy.size > 1 else 0.0
        combined = math.hypot(se_lhs, se_rhs)
        checks.append(_check(
            f"harnack_ckls[theta={params.theta!r},T={horizon!r},f={fn.label}]",
            lhs, log_rhs + bound.rhs_value, tolerances.mc_sigmas * combined,
            log_rhs=log_rhs, addend=bound.rhs_value, stderr=combined,
        ))
    return checks, bound.with_lhs(max(i.measured - i.details["log_rhs"] for i in checks))

def verify_harnack_vasicek(params: VasicekParams, mu0: InitialLaw, nu0: InitialLaw, t: float,
                           functions: Sequence[TestFunctionSpec], quadrature_order: int = 64,
                           flow_dt: float = 1e-3,
                           tolerances: Tolerances = Tolerances()) -> Tuple[List[Check], BoundReport]:
    """E log f under the flow from mu0 <= log E f under the flow from nu0 + Sigma(t) W2(mu0, nu0)^2."""
    g_mu, g_nu = _as_gaussian(mu0), _as_gaussian(nu0)
    p_mu = gaussian_flow.evolve(params, g_mu, t, flow_dt).final
    p_nu = gaussian_flow.evolve(params, g_nu, t, flow_dt).final
    if p_mu.variance == 0.0 or p_nu.variance == 0.0:
        raise DegenerateGaussian(f"The flows at t={t!r} are degenerate; the inequality needs t > 0")

    sigma_t = bounds.sigma_t_vasicek(params, t)
    w2 = gaussian_flow.w2_gaussians(g_mu, g_nu)
    addend = sigma_t * w2 ** 2
    report = BoundReport("harnack_vasicek", addend,
                         dict(t=t, sigma_t=sigma_t, w2=w2, mu0=[g_mu.mean, g_mu.variance],
                              nu0=[g_nu.mean, g_nu.variance]))

    checks = []
    for fn in functions:
        lhs = gaussian_flow.expectation(p_mu, fn.log, quadrature_order)
        log_rhs = math.log(gaussian_flow.expectation(p_nu, fn, quadrature_order))
        checks.append(_check(
            f"harnack_vasicek[t={t!r},f={fn.label},mu0=({g_mu.mean!r},{g_mu.variance!r}),nu0=({g_nu.mean!r},{g_nu.variance!r})]",
            lhs, log_rhs + addend, tolerances.flow_tolerance, log_rhs=log_rhs, addend=addend,
        ))
    return checks, report.with_lhs(max(i.measured - i.details["log_rhs"] for i in checks))


@dataclass
class ContractionResult:
    kind : ContractionKind
    rate : float
    fitted_rate : Optional[float]
    checks : List[Check]
    columns : Tuple[str, ...]
    rows : List[Sequence[Any]]


def _tail_fit(times: Sequence[float], values: Sequence[float], horizon: float) -> Optional[metrics.ExponentialFit]:
    points = [(t, v) for t, v in zip(times, values) if t >= horizon / 2.0 and v > 0.0]
    if len(points) < 3:
        return None
    return metrics.fit_exponential_rate([i[0] for i in points], [i[1] for i in points])

def _verify_w1_ckls(params: CklsParams, init_a: InitialLaw, init_b: InitialLaw, rate: float,
                    cfg: SimConfig, tolerances: Tolerances) -> ContractionResult:
    kind = ContractionKind.w1_ckls
    traj = particle_engine.simulate_coupled_ckls(params, _as_measure(init_a), _as_measure(init_b), cfg)
    times, distances, stderrs = traj.times, traj.distances, traj.distance_stderrs
    d0 = distances[0]
    columns = ("time", "coupled_distance", "stderr", "w1_empirical", "bound")
    rows, checks = [], []
    for t, d, se, a, b in zip(times, distances, stderrs, traj.snapshots_a, traj.snapshots_b):
        w1 = metrics.wasserstein_p(a.to_measure(), b.to_measure(), 1.0)
        bound = math.exp(-rate * t) * d0
        rows.append((t, d, se, w1, bound))
        relative = se / d if d > 0.0 else 0.0
        checks.append(_check(f"w1_pointwise[t={t!r}]", d, bound, bound * tolerances.mc_sigmas * relative,
                             relative_error=relative))
        checks.append(_check(f"w1_coupling_bound[t={t!r}]", w1, d, 1e-9))

    if d0 == 0.0:
        logging.info("Identical initial laws: the coupled distance vanishes identically")
        return ContractionResult(kind, rate, None, checks, columns, rows)
    fit = metrics.fit_exponential_rate(*zip(*[(t, d) for t, d in zip(times, distances) if d > 0.0]))
    checks.append(_check("w1_fitted_rate", fit.rate, rate, tolerances.mc_rate_slack, ">=",
                         r_squared=fit.r_squared, intercept=fit.intercept))
    return ContractionResult(kind, rate, fit.rate, checks, columns, rows)

def _flow_grid(trajectory: gaussian_flow.FlowTrajectory, grid_points: int):
    stride = max(1, (len(trajectory.times) - 1) // max(grid_points - 1, 1))
    indices = list(range(0, len(trajectory.times), stride))
    if indices[-1] != len(trajectory.times) - 1:
        indices.append(len(trajectory.times) - 1)
    return [(trajectory.times[i], trajectory.states[i]) for i in indices]

def _verify_vasicek_flows(kind: ContractionKind, params: VasicekParams, init_a: InitialLaw, init_b: InitialLaw,
                          rate: float, horizon: float, grid_points: int, flow_dt: float,
                          tolerances: Tolerances) -> ContractionResult:
    g_a, g_b = _as_gaussian(init_a), _as_gaussian(init_b)
    flow_a = _flow_grid(gaussian_flow.evolve(params, g_a, horizon, flow_dt), grid_points)
    flow_b = _flow_grid(gaussian_flow.evolve(params, g_b, horizon, flow_dt), grid_points)
    columns = ("time", "w2", "w2_bound", "entropy_a", "entropy_b")
    checks, rows = [], []

    if kind == ContractionKind.w2_vasicek:
        w2_0 = gaussian_flow.w2_gaussians(g_a, g_b)
        curve = []
        for (t, a), (_, b) in zip(flow_a, flow_b):
            w2 = gaussian_flow.w2_gaussians(a, b)
            bound = math.exp(-rate * t) * w2_0
            curve.append((t, w2))
            rows.append((t, w2, bound, "", ""))
            checks.append(_check(f"w2_pointwise[t={t!r}]", w2, bound, tolerances.wet_tolerance))
        curves = {"w2_fitted_rate": curve}
    else:
        # Both laws relax to the invariant one; only a law started off its mean excites the slow mean mode.
        stationary = gaussian_flow.stationary_state(params)
        curves = {"entropy_fitted_rate[a]": [], "entropy_fitted_rate[b]": []}
        for (t, a), (_, b) in zip(flow_a, flow_b):
            entries = []
            for label, state in (("entropy_fitted_rate[a]", a), ("entropy_fitted_rate[b]", b)):
                if state.variance == 0.0:
                    entries.append("")
                    continue
                ent = gaussian_flow.entropy_gaussians(state, stationary)
                curves[label].append((t, ent))
                entries.append(ent)
            rows.append((t, "", "", *entries))

    fitted = []
    for name, values in curves.items():
        if all(v == 0.0 for _, v in values):
            logging.info(f"{name}: the curve vanishes identically")
            continue
        fit = _tail_fit([i[0] for i in values], [i[1] for i in values], horizon)
        if fit is None:
            raise LabError(f"{name}: too few positive points on [T/2, T] for a rate fit; raise grid_points")
        checks.append(_check(name, fit.rate, rate, tolerances.flow_rate_slack, ">=",
                             r_squared=fit.r_squared, intercept=fit.intercept))
        fitted.append(fit.rate)
    return ContractionResult(kind, rate, min(fitted) if fitted else None, checks, columns, rows)

def verify_contraction(kind: ContractionKind, params, init_a: InitialLaw, init_b: InitialLaw, horizon: float,
                       cfg: Optional[SimConfig] = None, grid_points: int = 101, flow_dt: float = 1e-3,
                       tolerances: Tolerances = Tolerances()) -> ContractionResult:
    rates = bounds.contraction_rates(params)
    rate = rates.rate(kind)
    if rate is None:
        raise ConfigError(f"{kind.value} does not apply to {type(params).__name__}")
    if not rate > 0.0:
        raise NotErgodic(f"{kind.value}: contraction rate {rate!r} is not positive")
    logging.info(f"Verifying {kind.value} contraction at rate {rate!r}...")
    if kind == ContractionKind.w1_ckls:
        if cfg is None:
            raise ConfigError("w1-ckls contraction needs simulation settings")
        cfg = replace(cfg, horizon=horizon, mean_field_mode=MeanFieldMode.exact_mean)
        return _verify_w1_ckls(params, init_a, init_b, rate, cfg, tolerances)
    return _verify_vasicek_flows(kind, params, init_a, init_b, rate, horizon, grid_points, flow_dt, tolerances)


@dataclass
class StationaryResult:
    measure : EmpiricalMeasure
    snapshots : List[particle_engine.ParticleEnsemble]
    successive_w1 : List[float]
    stderr : float
    absorbed_fraction : float


def stationary_ckls(params: CklsParams, init: InitialLaw, burn_in: float, sample_horizon: float,
                    cfg: SimConfig, sample_every: float = 1.0) -> StationaryResult:
    """Pools post burn-in snapshots of an interacting ensemble into an empirical stationary law."""
    if not params.ergodic_ok:
        raise NotErgodic(f"No invariant law is claimed unless delta > gamma ({params})")
    horizon = burn_in + sample_horizon
    count = int(math.floor(sample_horizon / sample_every + 1e-9))
    times = tuple(burn_in + k * sample_every for k in range(count + 1))
    cfg = replace(cfg, horizon=horizon, snapshot_times=times)
    snapshots = particle_engine.simulate_ckls(params, _as_measure(init), cfg)

    successive = [metrics.wasserstein_p(a.to_measure(), b.to_measure(), 1.0)
                  for a, b in zip(snapshots, snapshots[1:])]
    pooled = EmpiricalMeasure.from_samples(np.concatenate([i.states for i in snapshots]))
    # Snapshot means are correlated in time; only the per-snapshot particle count is independent.
    stderr = float(np.std(pooled.atoms, ddof=1)) / math.sqrt(cfg.n_particles) if pooled.size > 1 else 0.0
    absorbed = float(np.mean(pooled.atoms < absorbed_level))
    logging.debug(f"Stationary law: mean {pooled.mean()!r}, successive W1 {successive}")
    return StationaryResult(pooled, snapshots, successive, stderr, absorbed)


def _simulate_ckls(config: ExperimentConfig, settings: Settings) -> ExperimentResult:
    params = config.ckls()
    cfg = config.sim_config(settings)
    init = config.law("a")
    snapshots = particle_engine.simulate_ckls(params, _as_measure(init), cfg)
    m0 = _as_measure(init).mean()

    result = ExperimentResult(ExperimentKind.simulate_ckls)
    for snap in snapshots:
        result.checks.append(_check(f"mean_flow[t={snap.time!r}]", abs(snap.mean() - exact_mean(params, m0, snap.time)),
                                    settings.tolerances.mc_sigmas * snap.mean_stderr() + 5.0 * cfg.dt,
                                    mean=snap.mean(), exact=exact_mean(params, m0, snap.time)))
    if cfg.scheme == Scheme.abs_euler_projected:
        lowest = min(float(i.states.min()) for i in snapshots)
        result.checks.append(_check("positivity", lowest, 0.0, relation=">="))
    result.columns, rows = particle_rows(snapshots, settings.series)
    result.rows = list(rows)
    return result

def _simulate_vasicek(config: ExperimentConfig, settings: Settings) -> ExperimentResult:
    params = config.vasicek()
    cfg = config.sim_config(settings)
    init = _as_gaussian(config.law("a"))
    snapshots = particle_engine.simulate_vasicek_particles(params, init, cfg)

    result = ExperimentResult(ExperimentKind.simulate_vasicek)
    sigmas = settings.tolerances.mc_sigmas
    for snap in snapshots:
        exact = gaussian_flow.evolve(params, init, snap.time, config.data["flow_dt"]).final
        result.checks.append(_check(f"flow_mean[t={snap.time!r}]", abs(snap.mean() - exact.mean),
                                    sigmas * snap.mean_stderr() + 5.0 * cfg.dt, particles=snap.mean()))
        result.checks.append(_check(f"flow_variance[t={snap.time!r}]", abs(snap.variance() - exact.variance),
                                    sigmas * snap.variance_stderr() + 5.0 * cfg.dt * max(1.0, exact.variance),
                                    particles=snap.variance(), flow=exact.variance))
    result.columns, rows = particle_rows(snapshots, settings.series)
    result.rows = list(rows)
    trajectory = gaussian_flow.evolve(params, init, cfg.horizon, config.data["flow_dt"])
    result.extra_series[trajectory_file_name] = (trajectory_columns, list(trajectory.rows()))
    return result

def _verify_harnack_ckls(config: ExperimentConfig, settings: Settings) -> ExperimentResult:
    result = ExperimentResult(ExperimentKind.verify_harnack_ckls)
    result.columns = ("theta", "T", "f", "lhs", "log_rhs", "addend", "stderr", "margin")
    functions = config.test_functions()
    for params in config.ckls_cases():
        for horizon in config.data["horizons"]:
            cfg = config.sim_config(settings, horizon=horizon, snapshot_times=(horizon,))
            checks, bound = verify_harnack_ckls(params, config.law("a"), config.law("b"), horizon, functions,
                                                cfg, settings.tolerances)
            result.checks.extend(checks)
            result.bounds.append(bound)
            for fn, check in zip(functions, checks):
                result.rows.append((params.theta, horizon, fn.label, check.measured, check.details["log_rhs"],
                                    check.details["addend"], check.details["stderr"], check.margin))
    return result

def _verify_harnack_vasicek(config: ExperimentConfig, settings: Settings) -> ExperimentResult:
    result = ExperimentResult(ExperimentKind.verify_harnack_vasicek)
    result.columns = ("case", "pair", "t", "f", "lhs", "log_rhs", "addend", "margin")
    functions = config.test_functions()
    for case, params in enumerate(config.vasicek_cases()):
        for pair, (mu0, nu0) in enumerate(config.law_pairs()):
            for t in config.data["horizons"]:
                checks, bound = verify_harnack_vasicek(params, mu0, nu0, t, functions, config.data["quadrature_order"],
                                                       config.data["flow_dt"], settings.tolerances)
                result.checks.extend(checks)
                result.bounds.append(bound)
                for fn, check in zip(functions, checks):
                    result.rows.append((case, pair, t, fn.label, check.measured, check.details["log_rhs"],
                                        check.details["addend"], check.margin))
        if params.lip_b == 0.0 and params.lip_sigma == 0.0 and params.beta != 0.0:
            for t in config.data["horizons"]:
                classical = 2.0 * params.beta * params.k_bound / (math.exp(2.0 * params.beta * t) - 1.0)
                value = bounds.sigma_t_vasicek(params, t)
                result.checks.append(_check(f"sigma_t_classical[case={case},t={t!r}]", abs(value - classical),
                                            1e-12 * max(1.0, classical), value=value, classical=classical))
    return result

def _verify_w1_contraction(config: ExperimentConfig, settings: Settings) -> ExperimentResult:
    cfg = config.sim_config(settings)
    outcome = verify_contraction(ContractionKind.w1_ckls, config.ckls(), config.law("a"), config.law("b"),
                                 cfg.horizon, cfg=cfg, tolerances=settings.tolerances)
    return ExperimentResult(ExperimentKind.verify_w1_contraction, outcome.checks, [], outcome.columns, outcome.rows)

def _verify_w2_entropy_contraction(config: ExperimentConfig, settings: Settings) -> ExperimentResult:
    params = config.vasicek()
    horizon = max(config.data["horizons"])
    result = ExperimentResult(ExperimentKind.verify_w2_entropy_contraction)
    merged: Dict[float, List[Any]] = {}
    for kind in (ContractionKind.w2_vasicek, ContractionKind.entropy_vasicek):
        outcome = verify_contraction(kind, params, config.law("a"), config.law("b"), horizon,
                                     grid_points=config.data["grid_points"], flow_dt=config.data["flow_dt"],
                                     tolerances=settings.tolerances)
        result.checks.extend(outcome.checks)
        result.columns = outcome.columns
        for row in outcome.rows:
            entry = merged.setdefault(row[0], [row[0]] + [""] * (len(row) - 1))
            for i, value in enumerate(row[1:], start=1):
                if value != "":
                    entry[i] = value
    result.rows = [tuple(merged[t]) for t in sorted(merged)]
    return result

def _verify_inverse_moment(config: ExperimentConfig, settings: Settings) -> ExperimentResult:
    result = ExperimentResult(ExperimentKind.verify_inverse_moment)
    result.columns = ("theta", "alpha", "estimate", "stderr", "bound", "floored_fraction")
    x0 = config.law("a")
    if not isinstance(x0, float):
        raise ConfigError("$.initial.a: the inverse-moment bound needs a Dirac initial law")
    tol = settings.tolerances
    for params in config.ckls_cases():
        cfg = config.sim_config(settings)
        cfg = replace(cfg, snapshot_times=(cfg.horizon,))
        bound = bounds.inverse_moment_bound(params.theta, params.alpha, bounds.delta_plus(params.delta), x0,
                                            cfg.horizon, config.data["zeta_l2"])
        integral = InverseMomentIntegral(params.theta, settings.inverse_moment_floor)
        particle_engine.simulate_ckls(params, x0, cfg, observers=(integral,))
        estimate = integral.result()
        label = f"theta={params.theta!r},alpha={params.alpha!r}"
        result.checks.append(_check(f"inverse_moment[{label}]", estimate.estimate + tol.confidence_z * estimate.stderr,
                                    bound.rhs_value, estimate=estimate.estimate, stderr=estimate.stderr))
        result.checks.append(_check(f"floored_mass[{label}]", estimate.floored_share, tol.floored_mass_limit,
                                    floored_fraction=estimate.floored_fraction))
        result.bounds.append(bound.with_lhs(estimate.estimate))
        result.rows.append((params.theta, params.alpha, estimate.estimate, estimate.stderr, bound.rhs_value,
                            estimate.floored_fraction))
    return result

def yw_grid(epsilon: float, points: int) -> np.ndarray:
    lo = epsilon / math.e
    near = np.geomspace(lo / 2.0, 2.0 * epsilon, max(points // 4, 2))
    wide = np.linspace(-3.0 * epsilon, 3.0 * epsilon, max(points - 2 * near.size, 3))
    return np.unique(np.concatenate((wide, near, -near, [0.0, lo, -lo, epsilon, -epsilon])))

def _verify_yw(config: ExperimentConfig, settings: Settings) -> ExperimentResult:
    result = ExperimentResult(ExperimentKind.verify_yw)
    result.columns = ("epsilon",) + yw_columns
    for epsilon in config.data["epsilons"]:
        fam = YwFamily(epsilon)
        xs = yw_grid(epsilon, config.data["grid_points"])
        for name, violation in property_violations(fam, xs).items():
            result.checks.append(_check(f"yw_{name}[eps={epsilon!r}]", violation, 0.0, 1e-10))
        lo, hi = fam.support
        mass, _ = integrate.quad(fam.psi, lo, hi, points=[epsilon * math.exp(-0.5)], epsabs=1e-13, epsrel=1e-12)
        result.checks.append(_check(f"yw_psi_mass[eps={epsilon!r}]", abs(mass - 1.0), 0.0, 1e-10, quadrature=mass))
        result.rows.extend((epsilon, *row) for row in fam.table(xs).tolist())
    return result

def _verify_lemma_ine(config: ExperimentConfig, settings: Settings) -> ExperimentResult:
    result = ExperimentResult(ExperimentKind.verify_lemma_ine)
    result.columns = ("k", "y", "lhs", "rhs")
    for k in config.data["k_values"]:
        ys = np.unique(np.concatenate((np.linspace(1.0 / k - 1.0, k - 1.0, config.data["grid_points"]), [0.0])))
        failures = 0
        for y in ys.tolist():
            lhs, rhs, holds = bounds.lemma_ine_check(1.0, 1.0 + y, k)
            failures += not holds
            result.rows.append((k, y, lhs, rhs))
        result.checks.append(_check(f"lemma_ine[K={k!r}]", failures, 0, points=int(ys.size)))
        lhs, rhs, _ = bounds.lemma_ine_check(1.0, 1.0, k)
        result.checks.append(_check(f"lemma_ine_equality[K={k!r}]", abs(lhs - rhs), 0.0, 1e-14))
    return result

def _stationary_ckls(config: ExperimentConfig, settings: Settings) -> ExperimentResult:
    params = config.ckls()
    cfg = config.sim_config(settings)
    outcome = stationary_ckls(params, config.law("a"), config.data["burn_in"], config.data["sample_horizon"], cfg,
                              config.data.get("sample_every", 1.0))
    tol = settings.tolerances
    result = ExperimentResult(ExperimentKind.stationary_ckls)
    target = stationary_mean(params)
    result.checks.append(_check("stationary_mean", abs(outcome.measure.mean() - target),
                                tol.mc_sigmas * outcome.stderr + 5.0 * cfg.dt, mean=outcome.measure.mean(),
                                target=target, absorbed_fraction=outcome.absorbed_fraction))
    if params.alpha == 0.0:
        # 0 is absorbing without inflow, so the invariant law is the Dirac mass at 0.
        result.checks.append(_check("absorbed_mass", outcome.absorbed_fraction, 1.0, relation=">=",
                                    level=absorbed_level))
    spread = max(float(outcome.snapshots[-1].states.std()), 0.0) / math.sqrt(cfg.n_particles)
    for i, w1 in enumerate(outcome.successive_w1):
        t = outcome.snapshots[i + 1].time
        result.checks.append(_check(f"successive_w1[t={t!r}]", w1, tol.mc_sigmas * spread))
    result.columns, rows = particle_rows(outcome.snapshots, settings.series)
    result.rows = list(rows)
    return result


_experiments = {
    ExperimentKind.simulate_ckls: _simulate_ckls,
    ExperimentKind.simulate_vasicek: _simulate_vasicek,
    ExperimentKind.verify_harnack_ckls: _verify_harnack_ckls,
    ExperimentKind.verify_harnack_vasicek: _verify_harnack_vasicek,
    ExperimentKind.verify_w1_contraction: _verify_w1_contraction,
    ExperimentKind.verify_w2_entropy_contraction: _verify_w2_entropy_contraction,
    ExperimentKind.verify_inverse_moment: _verify_inverse_moment,
    ExperimentKind.verify_yw: _verify_yw,
    ExperimentKind.verify_lemma_ine: _verify_lemma_ine,
    ExperimentKind.stationary_ckls: _stationary_ckls,
}

def run(config: ExperimentConfig, settings: Optional[Settings] = None) -> ExperimentResult:
    """Runs one experiment; the caller writes the report files."""
    settings = settings or default_settings()
    if config.series_mode is not None:
        settings = replace(settings, series=config.series_mode)
    logging.info(f"Running {config.kind.value} (seed {config.seed})...")
    result = _experiments[config.kind](config, settings)
    passed = sum(i.passed for i in result.checks)
    logging.info(f"{config.kind.value}: {passed} of {len(result.checks)} check(s) passed")
    return result
