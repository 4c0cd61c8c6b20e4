"""End-to-end empirical verification of the dynamical estimates on solver
trajectories.

Every verdict's pass criterion is pre-registered in the run configuration
(VerifyThresholds); the harness tests one-sided, failing only on violations
of proved bounds, never on slack.  Fitted constants are recorded in the
verdict, with no claim about their analytic magnitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.integrate import solve_ivp

from .config import VerifyThresholds
from .exponents import (ExponentSet, degiorgi_barrier, interpolation_exponents,
                        prodi_serrin_classify)
from .fields import integrate, level_functionals, level_set_plus
from .grid import FieldError
from .solver import Trajectory


@dataclass
class EstimateVerdict:
    estimate: str
    passed: bool
    quantities: dict                  # fitted slopes/constants/values
    bound: str                        # the pre-registered criterion, rendered
    applicable: bool = True
    fit_data: dict = dc_field(default_factory=dict)   # name -> columns dict for CSV

    CSV_HEADER = "estimate,passed,applicable,bound,quantities"

    def csv_row(self) -> str:
        quant = ";".join(f"{k}={v!r}" for k, v in sorted(self.quantities.items()))
        return ",".join([self.estimate, str(int(self.passed)),
                         str(int(self.applicable)), f"\"{self.bound}\"", f"\"{quant}\""])


def _relative_drift(series: np.ndarray, scale: float) -> float:
    return float(np.abs(series - series[0]).max() / scale)


def check_conservation_entropy(traj: Trajectory,
                               thresholds: VerifyThresholds | None = None) -> EstimateVerdict:
    """Mass exact, momentum/energy within drift budget, entropy monotone."""
    th = thresholds or traj.config.verify
    if len(traj.records) < 10:
        raise ValueError("need a trajectory with at least 10 steps")
    times = traj.times
    span = max(times[-1] - times[0], 1e-300)
    mass = traj.series(lambda r: r.mass)
    energy = traj.series(lambda r: r.energy)
    entropy = traj.series(lambda r: r.entropy)
    momentum = np.array([r.momentum for r in traj.records])
    mass_drift = _relative_drift(mass, mass[0])
    # momentum is zero for centered data; scale by the thermal momentum
    mom_scale = max(float(np.abs(momentum[0]).max()),
                    math.sqrt(mass[0] * energy[0]))
    mom_drift = float(np.abs(momentum - momentum[0]).max() / mom_scale) / span
    energy_drift = _relative_drift(energy, energy[0]) / span
    entropy_rise = float(np.diff(entropy).max()) if len(entropy) > 1 else 0.0
    passed = (mass_drift <= th.mass_rel
              and mom_drift <= th.momentum_energy_rel
              and energy_drift <= th.momentum_energy_rel
              and entropy_rise <= th.entropy_slack)
    return EstimateVerdict(
        estimate="conservation_entropy", passed=passed,
        quantities={"mass_drift": mass_drift, "momentum_drift_rate": mom_drift,
                    "energy_drift_rate": energy_drift, "max_entropy_rise": entropy_rise},
        bound=(f"mass<={th.mass_rel}; mom/energy rate<={th.momentum_energy_rel}; "
               f"entropy rise<={th.entropy_slack}"),
        fit_data={"conservation": {"time": times, "mass": mass, "energy": energy,
                                   "entropy": entropy}})


def check_moment_growth(traj: Trajectory, k: float,
                        thresholds: VerifyThresholds | None = None) -> EstimateVerdict:
    """Linear-bound surrogate: max of ||f||_{L1_k}/(1+t) attained early or
    nonincreasing afterwards."""
    th = thresholds or traj.config.verify
    if k <= 2.0:
        raise ValueError(f"moment growth needs k > 2 (got {k})")
    times = traj.times
    moment = traj.series(lambda r: r.moments[float(k)])
    ratio = moment / (1.0 + times)
    argmax = int(ratio.argmax())
    frac = times[argmax] / times[-1] if times[-1] > 0 else 0.0
    early = frac <= th.moment_window_fraction
    tail_ok = bool(np.all(np.diff(ratio[argmax:]) <= 1e-12 * ratio.max()))
    passed = early or tail_ok
    return EstimateVerdict(
        estimate=f"moment_growth_k{k:g}", passed=passed,
        quantities={"max_ratio": float(ratio.max()), "argmax_time": float(times[argmax]),
                    "argmax_fraction": float(frac)},
        bound=f"ratio max within first {th.moment_window_fraction:.0%} or nonincreasing after",
        fit_data={"moment_ratio": {"time": times, "ratio": ratio}})


def _fit_ode_constant(times: np.ndarray, y: np.ndarray, alpha1: float, alpha2: float,
                      fit_fraction: float) -> float:
    """Single constant C with dy/dt <= C (y + y^alpha1 (1+t)^alpha2) on the
    early window, fit as the max observed ratio (clipped at zero)."""
    t_end = times[0] + fit_fraction * (times[-1] - times[0])
    sel = times <= t_end
    if sel.sum() < 3:
        sel = slice(0, max(3, len(times) // 10))
    tw, yw = times[sel], y[sel]
    dy = np.gradient(yw, tw)
    envelope = yw + yw ** alpha1 * (1.0 + tw) ** alpha2
    ratios = dy / np.where(envelope > 0, envelope, 1.0)
    return float(max(ratios.max(), 0.0))


def check_lp_propagation(traj: Trajectory, p: float, m: float,
                         thresholds: VerifyThresholds | None = None) -> EstimateVerdict:
    """sup_t ||f||_p <= kappa ||f_in||_p on the window where the Bernoulli
    majorant stays finite, plus the majorant self-test."""
    th = thresholds or traj.config.verify
    *_, alpha1, alpha2 = (float(x) for x in interpolation_exponents(p, m))
    times = traj.times
    y = traj.series(lambda r: r.lp[float(p)]) ** p
    c_fit = _fit_ode_constant(times, y, alpha1, alpha2, th.lp_fit_fraction)

    def rhs(t, state):
        val = max(state[0], 0.0)
        return [c_fit * (val + val ** alpha1 * (1.0 + t) ** alpha2)]

    cap = 1e6 * max(y.max(), 1.0)

    def blown(t, state):
        return state[0] - cap
    blown.terminal = True

    sol = solve_ivp(rhs, (times[0], times[-1]), [y[0]], events=blown,
                    dense_output=True, rtol=1e-8, atol=1e-12 * max(y[0], 1e-300))
    t_finite = float(sol.t[-1])
    window = times <= t_finite + 1e-15
    majorant = sol.sol(np.clip(times[window], times[0], t_finite))[0]
    dominated = bool(np.all(y[window] <= majorant * (1.0 + th.majorant_slack)))
    sup_ratio = float((y[window] ** (1.0 / p)).max() / y[0] ** (1.0 / p))
    passed = sup_ratio <= th.kappa and dominated
    return EstimateVerdict(
        estimate=f"lp_propagation_p{p:g}", passed=passed,
        quantities={"sup_ratio": sup_ratio, "kappa": th.kappa, "ode_constant": c_fit,
                    "alpha1": alpha1, "alpha2": alpha2, "finite_until": t_finite,
                    "majorant_dominates": float(dominated)},
        bound=f"sup ||f||_p <= {th.kappa} ||f_in||_p on the majorant window; majorant dominates",
        fit_data={"lp_majorant": {"time": times[window], "lp_p": y[window],
                                  "majorant": majorant}})


def fit_smoothing_rate(traj: Trajectory, p: float, m: float,
                       thresholds: VerifyThresholds | None = None) -> EstimateVerdict:
    """Log-log slope of ||f(t)||_inf over the early window against -beta*-slack.

    The estimate is one-sided: the theory bounds how fast the sup norm may
    blow down as t -> 0+, so any shallower decay is consistent.  If no
    snapshot beats the window factor the verdict is not applicable.
    """
    th = thresholds or traj.config.verify
    exps = ExponentSet.from_pm(p, m)
    beta_star = float(exps.beta_star)
    snap_t = np.asarray(traj.snapshot_times)
    snap_linf = np.array([float(np.abs(f.values).max()) for f in traj.snapshot_fields])
    final = snap_linf[-1]
    sel = (snap_t > 0) & (snap_linf >= th.smoothing_window_factor * final)
    threshold = -beta_star - th.slope_slack
    monotone = bool(np.all(np.diff(snap_linf[1:]) <= 1e-12 * snap_linf.max()))
    if sel.sum() < 3:
        return EstimateVerdict(
            estimate="smoothing_rate", passed=monotone, applicable=False,
            quantities={"beta_star": beta_star, "window_count": int(sel.sum()),
                        "monotone_after_first": float(monotone),
                        "linf_initial": float(snap_linf[0]), "linf_final": float(final)},
            bound=(f"window ||f||_inf >= {th.smoothing_window_factor} ||f(T)||_inf empty: "
                   "datum not rough enough at this resolution"),
            fit_data={"smoothing": {"time": snap_t, "linf": snap_linf}})
    slope = float(np.polyfit(np.log(snap_t[sel]), np.log(snap_linf[sel]), 1)[0])
    passed = slope >= threshold and monotone
    return EstimateVerdict(
        estimate="smoothing_rate", passed=passed,
        quantities={"slope": slope, "threshold": threshold, "beta_star": beta_star,
                    "window_count": int(sel.sum()),
                    "monotone_after_first": float(monotone)},
        bound=f"slope >= -beta*(p,m) - {th.slope_slack} = {threshold:.6g}; monotone after first snapshot",
        fit_data={"smoothing": {"time": snap_t, "linf": snap_linf}})


def _level_grid(traj: Trajectory, count: int = 5) -> list[float]:
    sup = max(float(np.abs(f.values).max()) for f in traj.snapshot_fields)
    return [0.0] + [sup * q for q in (0.25, 0.5, 0.75)][: max(count - 1, 0)]


def calibrate_level_constants(traj: Trajectory, p: float, m: float,
                              ) -> tuple[float, float]:
    """Empirical max-ratio constants of the two level-set inequalities.

    C_e1: A_l(T1,T3) <= C_e1 (l-k)^{-gamma} E_k(T1,T3)^{1+beta}
    C_e2: E_l(T2,T3) <= C_e2 [1/((T2-T1)(l-k)) + 1 + l/(l-k) + l^2/(l-k)^2] A_k(T1,T3)
    """
    from .exponents import degiorgi_exponents

    beta, gamma = (float(x) for x in degiorgi_exponents(p, m))
    times = np.asarray(traj.snapshot_times)
    fields = traj.snapshot_fields
    t_end = float(times[-1])
    windows = [(0.0, t_end), (0.25 * t_end, t_end), (0.5 * t_end, t_end)]
    levels = _level_grid(traj)
    cache = {}

    def func(level, t1, t2):
        key = (level, t1, t2)
        if key not in cache:
            cache[key] = level_functionals(times, fields, level, t1, t2, p)
        return cache[key]

    c_e1 = 0.0
    c_e2 = 0.0
    usable = 0
    for t1, t3 in windows:
        for i, k in enumerate(levels):
            for level in levels[i + 1:]:
                try:
                    base = func(k, t1, t3)
                    upper = func(level, t1, t3)
                    t2 = 0.5 * (t1 + t3)
                    upper2 = func(level, t2, t3)
                except FieldError:
                    continue   # window too sparse for the stored snapshots
                usable += 1
                if base.energy > 0.0 and upper.control > 0.0:
                    c_e1 = max(c_e1, upper.control * (level - k) ** gamma
                               / base.energy ** (1.0 + beta))
                bracket = (1.0 / ((t2 - t1) * (level - k)) + 1.0
                           + level / (level - k) + level ** 2 / (level - k) ** 2)
                if base.control > 0.0 and upper2.energy > 0.0:
                    c_e2 = max(c_e2, upper2.energy / (bracket * base.control))
    if usable == 0:
        raise FieldError("no calibration window holds enough snapshots")
    return c_e1, c_e2


def degiorgi_empirical(traj: Trajectory, p: float, m: float, t: float, t_end: float,
                       thresholds: VerifyThresholds | None = None) -> EstimateVerdict:
    """Level-set iteration check: A_n dominated by the geometric barrier and
    max f on [t, T] below the barrier ceiling K.

    The recurrence constant is calibrated from this trajectory family (the
    theory offers no independent value), which is recorded as a caveat.
    """
    from .exponents import degiorgi_exponents

    th = thresholds or traj.config.verify
    beta, gamma = (float(x) for x in degiorgi_exponents(p, m))
    times = np.asarray(traj.snapshot_times)
    fields = traj.snapshot_fields
    if not 0.0 < t < t_end <= times[-1] + 1e-12:
        raise ValueError(f"need 0 < t < T within the trajectory (got t={t}, T={t_end})")
    c_e1, c_e2 = calibrate_level_constants(traj, p, m)
    # chain the two inequalities across two iteration steps: the dyadic
    # factors 2^{2 gamma + 3(1+beta)} accumulate from the level/time gaps
    c1 = max(c_e1 * c_e2 ** (1.0 + beta) * 2.0 ** (2.0 * gamma + 3.0 * (1.0 + beta)),
             1e-300)
    a0 = level_functionals(times, fields, 0.0, 0.0, t_end, p).control
    n_max = th.degiorgi_n_max
    if a0 <= 0.0:
        return EstimateVerdict(estimate="degiorgi", passed=True,
                               quantities={"A0": 0.0}, bound="A0 = 0: nothing to iterate")
    barrier = degiorgi_barrier(a0, t, beta, gamma, c1, n_max=n_max)
    sup_window = max(float(np.abs(f.values).max())
                     for f, s in zip(fields, times) if s >= t - 1e-15)
    levels = barrier.K * (1.0 - 2.0 ** -np.arange(n_max + 1, dtype=float))
    t_n = t * (1.0 - 2.0 ** -np.arange(n_max + 1, dtype=float))
    a_n = np.empty(n_max + 1)
    for idx in range(n_max + 1):
        a_n[idx] = level_functionals(times, fields, float(levels[idx]),
                                     float(t_n[idx]), t_end, p).control
    even = np.arange(0, n_max + 1, 2)
    dominated = bool(np.all(a_n[even] <= barrier.barrier[even] * (1.0 + 1e-12)))
    below_k = bool(sup_window <= barrier.K)
    reversed_ok = all(barrier.reversed_recurrence_margin(int(nn)) >= -1e-12 * a0
                      for nn in range(n_max - 1))
    passed = dominated and below_k and reversed_ok
    return EstimateVerdict(
        estimate="degiorgi", passed=passed,
        quantities={"A0": a0, "K": barrier.K, "Q": barrier.Q, "C1": c1,
                    "C_energy1": c_e1, "C_energy2": c_e2,
                    "sup_f_window": sup_window, "below_K": float(below_k),
                    "barrier_dominates": float(dominated),
                    "reversed_recurrence_ok": float(reversed_ok),
                    "caveat_self_calibrated": 1.0},
        bound="A_n <= A0 Q^-n for even n; max f on [t,T] <= K",
        fit_data={"degiorgi": {"n": np.arange(n_max + 1, dtype=float), "A_n": a_n,
                               "barrier": barrier.barrier[: n_max + 1]}})


def check_prodi_serrin(traj: Trajectory, r: float, p: float, m: float,
                       thresholds: VerifyThresholds | None = None) -> EstimateVerdict:
    """Mixed-norm finiteness, the averaged appearance bound, and the windowed
    energy-bound shape for strictly subcritical (r, p)."""
    classification = prodi_serrin_classify(p, r, m)
    if not classification.subcritical:
        raise ValueError(
            f"(r={r}, p={p}) is {classification.label}: the conditional theory "
            f"needs r > {classification.r_infimum} strictly")
    times = traj.times
    lp = traj.series(lambda rec: rec.lp[float(p)])
    ypr = lp ** r
    mixed = float(np.trapz(ypr, times))
    # measured Groenwall constant: sup over ordered pairs of y(t)/y(s)
    running_min = np.minimum.accumulate(ypr)
    c_gw = float(np.max(ypr[1:] / running_min[:-1])) if len(ypr) > 1 else 1.0
    cumulative = np.concatenate([[0.0], np.cumsum(np.diff(times) * 0.5 * (ypr[1:] + ypr[:-1]))])
    interior = times > 0
    appearance_margin = float(np.min(
        c_gw * cumulative[interior] - times[interior] * ypr[interior]))
    # windowed energy bound: sup_{[t,T]} ||f||_p^p <= C' / t^{p/r}
    ypp = lp ** p
    windowed = np.array([ypp[i:].max() for i in range(len(ypp))])
    c_prime = float(np.max(times[interior] ** (p / r) * windowed[interior]))
    monotone_windows = bool(np.all(np.diff(windowed) <= 1e-12 * ypp.max()))
    passed = (math.isfinite(mixed) and appearance_margin >= -1e-10 * max(mixed, 1.0)
              and math.isfinite(c_prime) and monotone_windows)
    return EstimateVerdict(
        estimate=f"prodi_serrin_r{r:g}_p{p:g}", passed=passed,
        quantities={"mixed_norm": mixed, "criticality": classification.criticality,
                    "p_alpha1_minus_p": classification.p_alpha1_minus_p,
                    "gronwall_ok": float(classification.gronwall_ok),
                    "C_gronwall": c_gw, "appearance_margin": appearance_margin,
                    "C_energy_window": c_prime,
                    "monotone_windows": float(monotone_windows)},
        bound="finite mixed norm; t ||f(t)||_p^r <= C int_0^t ||f||_p^r; windowed sup <= C'/t^{p/r}",
        fit_data={"prodi_serrin": {"time": times, "lp": lp, "windowed_sup_p": windowed}})


def run_suites(traj: Trajectory, suites: list[str]) -> list[EstimateVerdict]:
    th = traj.config.verify
    verdicts = []
    for suite in suites:
        if suite == "conservation":
            verdicts.append(check_conservation_entropy(traj, th))
        elif suite == "moments":
            verdicts.append(check_moment_growth(traj, th.moment_k, th))
        elif suite == "lp":
            verdicts.append(check_lp_propagation(traj, th.p, th.m, th))
        elif suite == "smoothing":
            verdicts.append(fit_smoothing_rate(traj, th.p, th.m, th))
        elif suite == "degiorgi":
            t_end = traj.snapshot_times[-1]
            verdicts.append(degiorgi_empirical(traj, th.p, th.m,
                                               th.degiorgi_t_fraction * t_end, t_end, th))
        elif suite == "prodi-serrin":
            verdicts.append(check_prodi_serrin(traj, th.r, th.p, th.m, th))
        else:
            raise ValueError(f"unknown suite {suite!r}")
    return verdicts


ALL_SUITES = ["conservation", "moments", "lp", "smoothing", "degiorgi", "prodi-serrin"]
