"""Opening the box: look-only and scoop measurement protocols.

:func:`run_protocol` is the expected-value view: it averages over the
measurement outcomes and, for Poisson timing, over the exponential waiting
times as well, so its output does not depend on any seed.
:func:`sample_trajectories` samples both the event clock and the outcomes
from counter-based streams, so results do not depend on chunking or thread
count.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
import math

import numpy as np
from scipy import stats
from scipy.linalg import expm

from . import rng
from .core import Well, build_hamiltonian, check_density_matrix, pure_state
from .dynamics import (DEPHASING, LindbladChannel, liouvillian, propagate_exact,
                       unitary_propagator)
from .trace import KineticsTrace

__all__ = [
    "SCOOP",
    "LOOK_ONLY",
    "PERIODIC",
    "POISSON",
    "MeasurementProtocol",
    "EnsembleState",
    "projective_look",
    "scoop",
    "event_schedule",
    "expected_schedule",
    "event_superoperator",
    "run_protocol",
    "sample_trajectories",
]

SCOOP = "scoop"
LOOK_ONLY = "look_only"
PERIODIC = "periodic"
POISSON = "poisson"

@dataclass(frozen=True)
class MeasurementProtocol:
    """When the box is opened and what happens when it is.

    ``timing`` is ``"periodic"`` (fixed ``interval``) or ``"poisson"``
    (exponential waiting times at ``rate``).  Poisson runs stop after
    ``count`` events, or at ``t_max`` when that is given instead.
    ``dephasing`` adds well-basis dephasing between events.  In look-only
    mode ``look_backaction`` collapses each particle onto the well it was
    seen in; by default a look only reads the populations.
    """

    timing: str = POISSON
    interval: float = None
    rate: float = None
    count: int = None
    t_max: float = None
    mode: str = SCOOP
    dephasing: float = 0.0
    look_backaction: bool = False

    def __post_init__(self):
        if self.mode not in (SCOOP, LOOK_ONLY):
            raise ValueError(f"mode must be {SCOOP!r} or {LOOK_ONLY!r}, got {self.mode!r}")
        if self.timing == PERIODIC:
            if self.interval is None or not self.interval > 0:
                raise ValueError(f"periodic timing needs interval > 0, got {self.interval}")
            if self.count is None:
                raise ValueError("periodic timing needs a count")
        elif self.timing == POISSON:
            if self.rate is None or not self.rate > 0:
                raise ValueError(f"poisson timing needs rate > 0, got {self.rate}")
            if (self.count is None) == (self.t_max is None):
                raise ValueError("poisson timing needs exactly one of count or t_max")
            if self.t_max is not None and not self.t_max > 0:
                raise ValueError(f"t_max must be > 0, got {self.t_max}")
        else:
            raise ValueError(f"timing must be {PERIODIC!r} or {POISSON!r}, got {self.timing!r}")
        if self.count is not None and (int(self.count) != self.count or self.count < 1):
            raise ValueError(f"count must be an integer >= 1, got {self.count}")
        if not (self.dephasing >= 0 and math.isfinite(self.dephasing)):
            raise ValueError(f"dephasing must be finite and >= 0, got {self.dephasing}")

    @classmethod
    def periodic(cls, interval, count, mode=SCOOP, **kw):
        return cls(timing=PERIODIC, interval=interval, count=count, mode=mode, **kw)

    @classmethod
    def poisson(cls, rate, count=None, t_max=None, mode=SCOOP, **kw):
        return cls(timing=POISSON, rate=rate, count=count, t_max=t_max, mode=mode, **kw)

    @property
    def channels(self):
        return [LindbladChannel(DEPHASING, self.dephasing)] if self.dephasing > 0 else []


@dataclass
class EnsembleState:
    """The box: ``n_particles`` in total, ``captured`` of them scooped out.

    ``rho`` describes the particles still in the wells and is kept at unit
    trace.
    """

    n_particles: int
    rho: np.ndarray = field(default_factory=lambda: pure_state(Well.X, 2))
    captured: float = 0.0

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError(f"n_particles must be >= 1, got {self.n_particles}")
        if not 0 <= self.captured <= self.n_particles:
            raise ValueError(f"captured={self.captured} outside [0, {self.n_particles}]")
        self.rho = np.asarray(self.rho, dtype=complex)
        if self.rho.shape != (2, 2):
            raise ValueError("the ensemble state lives in the 2-level well space")
        check_density_matrix(self.rho)

    @property
    def remaining(self):
        return self.n_particles - self.captured


def projective_look(rho):
    """Ensemble effect of asking every particle "are you in well Y?".

    Coherences between Y and the other states are erased; the diagonal is
    untouched, so the distribution over the wells does not change.
    """
    out = np.array(rho, dtype=complex)
    y = Well.Y
    keep = out[y, y]
    out[y, :] = 0.0
    out[:, y] = 0.0
    out[y, y] = keep
    return out


def scoop(state):
    """Remove the expected number of particles found in well Y.

    Particles that were not found in Y have been projected onto X, so the
    remaining sub-ensemble restarts from pure X.  An empty well Y leaves the
    state untouched.
    """
    p = float(np.clip(state.rho[Well.Y, Well.Y].real, 0.0, 1.0))
    if p == 0.0:
        return state
    captured = min(state.captured + state.remaining * p, float(state.n_particles))
    return EnsembleState(state.n_particles, pure_state(Well.X, 2), captured)


def event_schedule(protocol, seed=0):
    """Sampled waiting times before each event and the event times themselves.

    Poisson waiting times are drawn from the clock stream of ``seed``.
    """
    if protocol.timing == PERIODIC:
        taus = np.full(int(protocol.count), float(protocol.interval))
    elif protocol.count is not None:
        taus = rng.exponentials(seed, rng.CLOCK_STREAM, int(protocol.count), protocol.rate)
    else:
        # draw generously, then top up until the horizon is passed
        n = max(16, int(protocol.rate * protocol.t_max * 1.2) + 64)
        while True:
            taus = rng.exponentials(seed, rng.CLOCK_STREAM, n, protocol.rate)
            times = np.cumsum(taus)
            if times[-1] > protocol.t_max:
                break
            n *= 2
        taus = taus[: np.searchsorted(times, protocol.t_max, side="right")]
        if taus.size == 0:
            raise ValueError("no measurement event falls before t_max")
    return taus, np.cumsum(taus)


def expected_schedule(protocol):
    """Event times used by the expected-value run.

    Periodic events fall on multiples of the interval; Poisson events are
    placed at their mean times ``k / rate``.
    """
    if protocol.timing == PERIODIC:
        return protocol.interval * np.arange(1, int(protocol.count) + 1)
    if protocol.count is not None:
        n = int(protocol.count)
    else:
        n = int(math.floor(protocol.rate * protocol.t_max * (1 + 1e-12)))
        if n < 1:
            raise ValueError("no measurement event falls before t_max")
    return np.arange(1, n + 1) / protocol.rate


def _two_level(system):
    return system.with_capture_state(False) if system.include_capture_state else system


def event_superoperator(system, protocol):
    """Map from the state right after one event to the mean state at the next.

    Periodic timing gives the exact propagator over one interval.  Poisson
    timing averages it over an exponential waiting time, which is the
    resolvent ``rate * (rate - L)^-1`` of the Liouvillian ``L``.
    """
    system = _two_level(system)
    if protocol.timing == PERIODIC:
        if not protocol.channels:
            U = unitary_propagator(system, protocol.interval)
            return np.kron(U, U.conj())
        sup = liouvillian(build_hamiltonian(system), protocol.channels)
        return expm(protocol.interval * sup)
    sup = liouvillian(build_hamiltonian(system), protocol.channels)
    g = protocol.rate
    return g * np.linalg.inv(g * np.eye(sup.shape[0]) - sup)


def _apply(S, rho):
    return (S @ np.asarray(rho, dtype=complex).reshape(-1)).reshape(2, 2)


def _y_pop(states):
    return np.clip(np.asarray(states)[..., Well.Y, Well.Y].real, 0.0, 1.0)


def _look_backaction_series(y1, a, b):
    y = np.empty(len(a))
    y[0] = y1
    for k in range(1, len(a)):
        y[k] = (1.0 - y[k - 1]) * a[k] + y[k - 1] * b[k]
    return np.clip(y, 0.0, 1.0)


def run_protocol(system, protocol, n_particles=10**6, initial=None):
    """Expected-value run of the open/measure/close loop.

    Between events the remaining particles evolve freely (with optional
    dephasing).  In scoop mode each event removes ``remaining * P(Y)``
    particles and resets the rest to X; in look-only mode each event records
    the well-Y occupancy.  Poisson waiting times are averaged out exactly,
    so the result is fully deterministic.

    Returns:
        KineticsTrace with one sample per event; ``meta["final_state"]``
        holds the resulting :class:`EnsembleState`.
    """
    system = _two_level(system)
    state = initial if initial is not None else EnsembleState(n_particles)
    if state.n_particles != n_particles:
        raise ValueError("initial state and n_particles disagree")
    times = expected_schedule(protocol)
    K = len(times)
    S = event_superoperator(system, protocol)
    x_state, y_state = pure_state(Well.X, 2), pure_state(Well.Y, 2)
    y1 = _y_pop(_apply(S, state.rho))
    n = float(n_particles)
    remaining0 = state.remaining

    if protocol.mode == SCOOP:
        p = np.full(K, _y_pop(_apply(S, x_state)))
        p[0] = y1
        log_survival = np.cumsum(np.log1p(-np.minimum(p, 1.0)))
        before = remaining0 * np.exp(np.concatenate(([0.0], log_survival[:-1])))
        counts = before * p
        captured = state.captured + remaining0 * -np.expm1(log_survival)
        captured = np.minimum(np.maximum.accumulate(captured), n)
        final_rho = x_state if np.any(p > 0) else state.rho
        final = EnsembleState(n_particles, final_rho, float(captured[-1]))
        trace = KineticsTrace(times, 1.0 - p, p, captured / n, counts)
    else:
        if protocol.look_backaction:
            a = np.full(K, _y_pop(_apply(S, x_state)))
            b = np.full(K, _y_pop(_apply(S, y_state)))
            y = _look_backaction_series(y1, a, b)
            final_rho = np.diag([1.0 - y[-1], y[-1]]).astype(complex)
        else:
            y = np.empty(K)
            v = state.rho.reshape(-1)
            for k in range(K):
                v = S @ v
                y[k] = v[3].real
            y = np.clip(y, 0.0, 1.0)
            final_rho = v.reshape(2, 2)
        final = EnsembleState(n_particles, final_rho, state.captured)
        trace = KineticsTrace(times, 1.0 - y, y, np.full(K, state.captured / n),
                              remaining0 * y)
    trace.meta.update(final_state=final, mode="deterministic", protocol=protocol)
    return trace


def _chunks(n, size):
    return [(lo, min(n, lo + size)) for lo in range(0, n, size)]


def _scoop_chunk(seed, lo, hi, hazard):
    # first event at which the cumulative hazard exceeds -ln(u): an exact
    # inverse-CDF draw of the capture event under per-event Bernoulli thinning
    u = rng.uniforms(seed, rng.PARTICLE_STREAM, np.arange(lo, hi, dtype=np.uint64), 0)
    first = np.searchsorted(hazard, -np.log(u), side="right")
    return np.bincount(first, minlength=len(hazard) + 1)[: len(hazard)]


def _look_backaction_chunk(seed, lo, hi, y1, a, b):
    idx = np.arange(lo, hi, dtype=np.uint64)
    in_y = np.zeros(hi - lo, dtype=bool)
    counts = np.zeros(len(a), dtype=np.int64)
    for block in range(-(-len(a) // 4)):
        u = rng.uniform_block(seed, rng.PARTICLE_STREAM, idx, block)
        for lane in range(4):
            k = 4 * block + lane
            if k >= len(a):
                break
            prob = y1 if k == 0 else np.where(in_y, b[k], a[k])
            in_y = u[:, lane] < prob
            counts[k] = np.count_nonzero(in_y)
    return counts


def _run_jobs(worker, jobs, workers, n_events):
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: worker(*job), jobs))
    else:
        parts = [worker(*job) for job in jobs]
    # integer sums are exact, so the reduction order cannot matter
    total = np.zeros(n_events, dtype=np.int64)
    for part in parts:
        total += part
    return total


def sample_trajectories(system, protocol, n_particles, master_seed=0, workers=1,
                        initial=None):
    """Monte Carlo run of the same protocol.

    The event clock is sampled from ``master_seed``.  In scoop mode, and in
    look-only mode with back-action, every particle is followed individually
    and only ever uses the stream keyed by ``(master_seed, i)``; its outcome
    at an event is a Bernoulli draw with the probability of finding it in
    well Y.  Looks without back-action leave the particles untouched, so only
    the per-event binomial count is drawn.  Output is bit-identical for any
    ``workers`` and any processing order.
    """
    if n_particles < 1:
        raise ValueError(f"n_particles must be >= 1, got {n_particles}")
    system = _two_level(system)
    state = initial if initial is not None else EnsembleState(n_particles)
    if state.n_particles != n_particles:
        raise ValueError("initial state and n_particles disagree")
    if state.captured != int(state.captured):
        raise ValueError("Monte Carlo runs need an integer captured count")
    taus, times = event_schedule(protocol, master_seed)
    K = len(taus)
    remaining0 = int(state.n_particles - state.captured)
    channels = protocol.channels
    x_state, y_state = pure_state(Well.X, 2), pure_state(Well.Y, 2)
    y1 = _y_pop(propagate_exact(state.rho, system, channels, taus[0]))

    if protocol.mode == SCOOP:
        p = _y_pop(propagate_exact(x_state, system, channels, taus))
        p[0] = y1
        hazard = np.cumsum(-np.log1p(-np.minimum(p, 1.0)))
        jobs = [(master_seed, lo, hi, hazard) for lo, hi in _chunks(remaining0, 1 << 18)]
        counts = _run_jobs(_scoop_chunk, jobs, workers, K)
    elif protocol.look_backaction:
        a = _y_pop(propagate_exact(x_state, system, channels, taus))
        b = _y_pop(propagate_exact(y_state, system, channels, taus))
        jobs = [(master_seed, lo, hi, y1, a, b) for lo, hi in _chunks(remaining0, 1 << 16)]
        counts = _run_jobs(_look_backaction_chunk, jobs, workers, K)
    else:
        y = _y_pop(propagate_exact(state.rho, system, channels, times))
        u = rng.uniforms(master_seed, rng.OBSERVATION_STREAM, 0, np.arange(K))
        counts = stats.binom.ppf(u, remaining0, y).astype(np.int64)

    n = float(n_particles)
    if protocol.mode == SCOOP:
        captured = state.captured + np.cumsum(counts)
        before = remaining0 - np.concatenate(([0], np.cumsum(counts)[:-1]))
        frac_y = np.divide(counts, before, out=np.zeros(K), where=before > 0)
        final = EnsembleState(n_particles, x_state, float(captured[-1]))
        trace = KineticsTrace(times, 1.0 - frac_y, frac_y, captured / n, counts)
    else:
        frac_y = counts / remaining0 if remaining0 else np.zeros(K)
        final = replace(state)
        trace = KineticsTrace(times, 1.0 - frac_y, frac_y,
                              np.full(K, state.captured / n), counts)
    trace.meta.update(final_state=final, mode="montecarlo", protocol=protocol)
    return trace
