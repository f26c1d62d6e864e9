"""Named experiments: the scooped box, the two-rate mutation model, Zeno scans
and the reversible-versus-absorbing decay contrast."""

from dataclasses import dataclass, field
import math

import numpy as np

from .core import Well, WellSystem, epsilon_for_occupancy, mean_y_occupancy, pure_state
from .dynamics import CAPTURE, DEPHASING, EvolutionConfig, LindbladChannel, evolve_lindblad
from .measurement import (LOOK_ONLY, SCOOP, MeasurementProtocol, run_protocol,
                          sample_trajectories)

__all__ = [
    "FitError",
    "RegimeError",
    "EnhancementResult",
    "DEFAULT_OCCUPANCY",
    "reference_box_system",
    "fit_exponential_rate",
    "log_survival_r2",
    "scoop_box_experiment",
    "adaptive_mutation_run",
    "zeno_scan",
    "unmeasured_transfer_proxy",
    "alpha_decay_compare",
    "late_window_slope",
]

DEFAULT_OCCUPANCY = 1e-5
DETERMINISTIC = "deterministic"
MONTECARLO = "montecarlo"


class FitError(ValueError):
    """The trace does not support an exponential-rate fit."""


class RegimeError(ValueError):
    """Event rates too close to the Rabi frequency for the ratio prediction."""


@dataclass
class EnhancementResult:
    rate_minus: float
    rate_plus: float
    enhancement: float
    predicted: float
    traces: dict = field(default_factory=dict, repr=False)


def reference_box_system(delta=1.0, occupancy=DEFAULT_OCCUPANCY):
    """Double well whose time-averaged well-Y occupancy is ``occupancy``.

    With the defaults that is ten particles per million, epsilon ~ 223.6.
    """
    return WellSystem(delta, epsilon_for_occupancy(delta, occupancy))


def _check_monotone(frac):
    if np.any(np.diff(frac) < -1e-12):
        raise FitError("captured fraction is not monotone")


def _window(trace, max_fraction):
    frac = np.asarray(trace.captured_fraction)
    _check_monotone(frac)
    return frac < max_fraction


def fit_exponential_rate(trace, max_fraction=0.5, min_samples=10):
    """Rate ``k`` of ``captured_fraction = 1 - exp(-k t)``.

    Least-squares slope of ``-ln(1 - captured_fraction)`` against time over
    the samples whose captured fraction is still below ``max_fraction``.

    Raises:
        FitError: fewer than ``min_samples`` usable samples, a non-monotone
            trace, or no decay at all.
    """
    mask = _window(trace, max_fraction)
    if np.count_nonzero(mask) < min_samples:
        raise FitError(f"need at least {min_samples} samples with captured "
                       f"fraction < {max_fraction}, got {np.count_nonzero(mask)}")
    t = np.asarray(trace.time)[mask]
    y = -np.log1p(-np.asarray(trace.captured_fraction)[mask])
    slope = np.polyfit(t, y, 1)[0]
    if not slope > 0:
        raise FitError("captured fraction shows no decay")
    return float(slope)


def log_survival_r2(trace, max_fraction=1.0):
    """R^2 of a straight-line fit of ``-ln(1 - captured_fraction)`` against time."""
    mask = _window(trace, max_fraction)
    t = np.asarray(trace.time)[mask]
    y = -np.log1p(-np.asarray(trace.captured_fraction)[mask])
    coef = np.polyfit(t, y, 1)
    resid = y - np.polyval(coef, t)
    ss_tot = np.sum((y - y.mean()) ** 2)
    return float(1.0 - np.sum(resid ** 2) / ss_tot) if ss_tot > 0 else 0.0


def _run(system, protocol, n_particles, mode, seed, workers):
    if mode == DETERMINISTIC:
        return run_protocol(system, protocol, n_particles)
    if mode == MONTECARLO:
        return sample_trajectories(system, protocol, n_particles, seed, workers=workers)
    raise ValueError(f"mode must be {DETERMINISTIC!r} or {MONTECARLO!r}, got {mode!r}")


def scoop_box_experiment(n=10**6, delta=1.0, epsilon=None, protocol=None,
                         mode=DETERMINISTIC, seed=0, workers=1):
    """A million particles in the box, opened at Poisson times.

    ``epsilon`` defaults to the bias giving ten particles per million in
    well Y on average; ``protocol`` defaults to 1000 Poisson-timed scoops
    at unit rate.
    """
    if epsilon is None:
        epsilon = epsilon_for_occupancy(delta, DEFAULT_OCCUPANCY)
    if protocol is None:
        protocol = MeasurementProtocol.poisson(1.0, count=1000, mode=SCOOP)
    return _run(WellSystem(delta, epsilon), protocol, n, mode, seed, workers)


def _arm_seed(seed, arm):
    return int(np.random.SeedSequence(seed, spawn_key=(arm,)).generate_state(1, np.uint64)[0])


def adaptive_mutation_run(gamma_minus, gamma_plus, system=None, t_max=None,
                          n_particles=10**6, mode=DETERMINISTIC, seed=0, workers=1,
                          minus_arm="counted"):
    """Mutation kinetics with and without the selective (lactose) coupling.

    Both arms are Poisson-timed scoop protocols: decoherence events at
    ``gamma_minus`` (thermal only) or ``gamma_plus`` (thermal plus lactose),
    each collapsing well Y and counting what is found there.  With
    ``minus_arm="reversible"`` the thermal arm only looks, its mutant
    fraction stays flat and ``rate_minus`` is reported as 0.

    ``t_max`` defaults to 1000 thermal events.

    Raises:
        RegimeError: a rate is not below Omega/10, where the per-event
            transfer probability stops being the time-averaged occupancy.
    """
    if system is None:
        system = reference_box_system()
    if not (gamma_minus > 0 and gamma_plus > 0):
        raise ValueError("both decoherence rates must be positive")
    if minus_arm not in ("counted", "reversible"):
        raise ValueError(f"minus_arm must be 'counted' or 'reversible', got {minus_arm!r}")
    omega = system.rabi_frequency
    for name, g in (("gamma_minus", gamma_minus), ("gamma_plus", gamma_plus)):
        if not g < omega / 10:
            raise RegimeError(f"{name}={g} is not below Omega/10={omega / 10:.6g}")
    if t_max is None:
        t_max = 1000.0 / gamma_minus

    minus_mode = SCOOP if minus_arm == "counted" else LOOK_ONLY
    minus = _run(system, MeasurementProtocol.poisson(gamma_minus, t_max=t_max, mode=minus_mode),
                 n_particles, mode, _arm_seed(seed, 0), workers)
    plus = _run(system, MeasurementProtocol.poisson(gamma_plus, t_max=t_max, mode=SCOOP),
                n_particles, mode, _arm_seed(seed, 1), workers)
    rate_plus = fit_exponential_rate(plus)
    rate_minus = fit_exponential_rate(minus) if minus_arm == "counted" else 0.0
    enhancement = rate_plus / rate_minus if rate_minus > 0 else math.inf
    return EnhancementResult(rate_minus, rate_plus, enhancement, gamma_plus / gamma_minus,
                             traces={"minus": minus, "plus": plus})


def zeno_scan(system, taus):
    """Effective transfer rate under periodic scooping, one row per interval.

    Each rate is the fraction captured by one scoop after free evolution for
    ``tau``, divided by ``tau``.

    Returns:
        Array of shape (len(taus), 2) with rows ``(tau, rate)``.
    """
    taus = np.asarray(taus, dtype=float)
    if taus.ndim != 1 or np.any(taus <= 0):
        raise ValueError("taus must be a 1-d array of positive intervals")
    rows = np.empty((len(taus), 2))
    for i, tau in enumerate(taus):
        trace = run_protocol(system, MeasurementProtocol.periodic(tau, 1, mode=SCOOP), 1)
        rows[i] = tau, trace.captured_fraction[0] / tau
    return rows


def unmeasured_transfer_proxy(system):
    """Mean well-Y occupancy per Rabi period: p_Y * Omega / (2 pi)."""
    return mean_y_occupancy(system.delta, system.epsilon) * system.rabi_frequency / (2 * math.pi)


def _lindblad_trace(system, channels, t_max, dt, samples):
    if dt is None:
        dt = EvolutionConfig.max_dt(system, channels)
        if math.isinf(dt):
            dt = t_max / 1000
    n_steps = max(1, math.ceil(t_max / dt - 1e-9))
    stride = max(1, n_steps // samples)
    rho0 = pure_state(Well.X, system.dim)
    return evolve_lindblad(rho0, system, channels, EvolutionConfig(dt, t_max, stride))


def alpha_decay_compare(system, gamma, t_max, dt=None, samples=1000):
    """Reversible (dephasing only) versus absorbing (capture) decay from well X.

    Both runs use rate ``gamma``.  ``dt`` defaults to the largest stable
    step; about ``samples`` points are recorded per run.

    Returns:
        ``(reversible, absorbing)`` traces.
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    two = system.with_capture_state(False)
    three = system.with_capture_state(True)
    reversible = _lindblad_trace(two, [LindbladChannel(DEPHASING, gamma)], t_max, dt, samples)
    absorbing = _lindblad_trace(three, [LindbladChannel(CAPTURE, gamma)], t_max, dt, samples)
    return reversible, absorbing


def late_window_slope(trace, column="pop_y", fraction=0.25):
    """Least-squares slope of ``column`` against time over the final ``fraction`` of the run."""
    t = np.asarray(trace.time)
    y = np.asarray(getattr(trace, column))
    mask = t >= t[-1] - fraction * (t[-1] - t[0])
    return float(np.polyfit(t[mask], y[mask], 1)[0])
