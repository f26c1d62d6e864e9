"""Unitary and Lindblad time evolution of the well density matrix."""

from dataclasses import dataclass
import math

import numpy as np
from scipy.linalg import expm

from .core import Well, build_hamiltonian, check_density_matrix, population
from .trace import KineticsTrace

__all__ = [
    "DEPHASING",
    "CAPTURE",
    "LindbladChannel",
    "EvolutionConfig",
    "TraceDriftError",
    "unitary_propagator",
    "evolve_unitary",
    "lindblad_rhs",
    "liouvillian",
    "rk4_step",
    "rk4_propagator",
    "propagate_exact",
    "evolve_lindblad",
]

DEPHASING = "dephasing_Y"
CAPTURE = "capture_Y_to_C"
_KINDS = (DEPHASING, CAPTURE)

TRACE_DRIFT_TOL = 1e-6


class TraceDriftError(ArithmeticError):
    """The integrated trace wandered further than the integrator can be trusted."""


@dataclass(frozen=True)
class LindbladChannel:
    """Collapse channel acting on well Y.

    ``dephasing_Y`` uses |Y><Y| (well-basis dephasing); ``capture_Y_to_C``
    uses |C><Y| and needs the 3-level embedding.
    """

    kind: str
    rate: float

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}; expected one of {_KINDS}")
        if not (self.rate >= 0 and math.isfinite(self.rate)):
            raise ValueError(f"channel rate must be finite and >= 0, got {self.rate}")

    def operator(self, dim):
        L = np.zeros((dim, dim), dtype=complex)
        if self.kind == DEPHASING:
            L[Well.Y, Well.Y] = 1.0
        else:
            if dim < 3:
                raise ValueError("capture_Y_to_C requires the 3-level embedding")
            L[Well.C, Well.Y] = 1.0
        return L


@dataclass(frozen=True)
class EvolutionConfig:
    """Fixed-step integration settings.

    ``t_max`` is split into ``ceil(t_max / dt)`` equal steps, so the step
    actually taken never exceeds ``dt``.
    """

    dt: float
    t_max: float
    record_stride: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.t_max > 0:
            raise ValueError(f"t_max must be > 0, got {self.t_max}")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError(f"record_stride must be an integer >= 1, got {self.record_stride}")

    @staticmethod
    def max_dt(system, channels=()):
        """Largest step allowed for ``system`` and ``channels``."""
        limits = [math.inf]
        omega = system.rabi_frequency
        if omega > 0:
            limits.append(0.01 / omega)
        gamma_max = max((ch.rate for ch in channels), default=0.0)
        if gamma_max > 0:
            limits.append(0.1 / gamma_max)
        return min(limits)

    @classmethod
    def auto(cls, system, channels, t_max, record_stride=1):
        dt = cls.max_dt(system, channels)
        if math.isinf(dt):
            dt = t_max / 100
        return cls(dt=dt, t_max=t_max, record_stride=record_stride)

    @property
    def n_steps(self):
        return max(1, math.ceil(self.t_max / self.dt - 1e-9))

    def validate(self, system, channels=()):
        limit = self.max_dt(system, channels)
        if self.dt > limit * (1 + 1e-12):
            raise ValueError(
                f"dt={self.dt} exceeds the stability limit {limit:.6g} "
                "(dt <= 0.01/Omega and dt <= 0.1/Gamma_max)")


def unitary_propagator(system, t):
    """exp(-i H t) in closed form; ``t`` may be an array.

    Returns shape ``t.shape + (dim, dim)``.
    """
    t = np.asarray(t, dtype=float)
    delta, eps = system.delta, system.epsilon
    omega = system.rabi_frequency
    half = 0.5 * omega * t
    cos = np.cos(half)
    if omega > 0:
        sin_over = np.sin(half) / omega
    else:
        sin_over = np.zeros_like(t)
    phase = np.exp(-0.5j * eps * t)
    # H = eps/2 + (-delta/2) sx + (-eps/2) sz
    U = np.zeros(t.shape + (system.dim, system.dim), dtype=complex)
    U[..., 0, 0] = phase * (cos + 1j * eps * sin_over)
    U[..., 1, 1] = phase * (cos - 1j * eps * sin_over)
    U[..., 0, 1] = U[..., 1, 0] = phase * 1j * delta * sin_over
    if system.dim == 3:
        U[..., 2, 2] = 1.0
    return U


def evolve_unitary(rho, system, t):
    """U rho U^dagger with U = exp(-i H t)."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape[0] != system.dim:
        raise ValueError(f"rho is {rho.shape[0]}-level but the system is {system.dim}-level")
    U = unitary_propagator(system, t)
    return U @ rho @ np.swapaxes(U.conj(), -1, -2)


def _operators(channels, dim):
    return [(ch.rate, ch.operator(dim)) for ch in channels if ch.rate > 0]


def lindblad_rhs(rho, H, channels):
    """-i[H, rho] + sum_k rate_k (L rho L^dag - 1/2 {L^dag L, rho})."""
    rho = np.asarray(rho)
    H = np.asarray(H)
    if rho.shape != H.shape:
        raise ValueError(f"dimension mismatch: rho {rho.shape} vs H {H.shape}")
    out = -1j * (H @ rho - rho @ H)
    for rate, L in _operators(channels, H.shape[0]):
        Ld = L.conj().T
        LdL = Ld @ L
        out += rate * (L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL))
    return out


def liouvillian(H, channels):
    """Superoperator of :func:`lindblad_rhs` acting on row-major ``rho.ravel()``."""
    H = np.asarray(H, dtype=complex)
    n = H.shape[0]
    eye = np.eye(n)
    # row-major vec: vec(A rho B) = kron(A, B.T) vec(rho)
    sup = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    for rate, L in _operators(channels, n):
        LdL = L.conj().T @ L
        sup += rate * (np.kron(L, L.conj())
                       - 0.5 * np.kron(LdL, eye) - 0.5 * np.kron(eye, LdL.T))
    return sup


def rk4_step(rhs, rho, dt):
    """Classic four-stage Runge-Kutta step for ``drho/dt = rhs(rho)``."""
    k1 = rhs(rho)
    k2 = rhs(rho + 0.5 * dt * k1)
    k3 = rhs(rho + 0.5 * dt * k2)
    k4 = rhs(rho + dt * k3)
    return rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_propagator(sup, dt):
    """One RK4 step of the linear ODE ``v' = sup v`` as a matrix.

    For an autonomous linear system the four stages collapse to the
    degree-4 Taylor polynomial of ``exp(dt * sup)``.
    """
    A = dt * np.asarray(sup)
    P = np.eye(A.shape[0], dtype=complex)
    term = np.eye(A.shape[0], dtype=complex)
    for k in range(1, 5):
        term = term @ A / k
        P = P + term
    return P


def propagate_exact(rho, system, channels, t):
    """Exact evolution via the matrix exponential; ``t`` may be an array."""
    rho = np.asarray(rho, dtype=complex)
    n = rho.shape[0]
    active = [ch for ch in channels if ch.rate > 0]
    if not active:
        return evolve_unitary(rho, system, t)
    sup = liouvillian(build_hamiltonian(system), active)
    t = np.asarray(t, dtype=float)
    props = expm(t[..., None, None] * sup)
    return (props @ rho.reshape(-1)).reshape(t.shape + (n, n))


def _sample(trace_rows, t, rho):
    pc = population(rho, Well.C) if rho.shape[0] == 3 else 0.0
    trace_rows.append((t, population(rho, Well.X), population(rho, Well.Y), pc))


def evolve_lindblad(rho, system, channels, config):
    """Integrate the master equation with fixed-step RK4.

    Every recorded sample is checked for Hermiticity and the eigenvalue
    floor, and the trace may not drift by more than 1e-6 from its initial
    value.

    Raises:
        ValueError: the step size violates ``dt <= 0.01/Omega`` or
            ``dt <= 0.1/Gamma_max``, or a capture channel is used without
            the capture state.
        TraceDriftError: the trace drifted by more than 1e-6.
    """
    rho = np.array(rho, dtype=complex)
    channels = list(channels)
    if rho.shape != (system.dim, system.dim):
        raise ValueError(f"rho shape {rho.shape} does not match a {system.dim}-level system")
    for ch in channels:
        ch.operator(system.dim)
    config.validate(system, channels)
    check_density_matrix(rho, unit_trace=False)

    n_steps = config.n_steps
    h = config.t_max / n_steps
    stride = int(config.record_stride)
    sup = liouvillian(build_hamiltonian(system), channels)
    step = rk4_propagator(sup, h)
    jump = np.linalg.matrix_power(step, stride)

    trace0 = np.trace(rho).real
    v = rho.reshape(-1)
    rows = []
    _sample(rows, 0.0, rho)
    done = 0
    while done < n_steps:
        take = min(stride, n_steps - done)
        v = (jump if take == stride else np.linalg.matrix_power(step, take)) @ v
        done += take
        current = v.reshape(rho.shape)
        drift = abs(np.trace(current).real - trace0)
        if drift > TRACE_DRIFT_TOL:
            raise TraceDriftError(f"trace drifted by {drift:.3e} at t={done * h:.6g}")
        check_density_matrix(current, check_trace=False)
        _sample(rows, done * h, current)

    cols = np.array(rows).T
    return KineticsTrace(cols[0], cols[1], cols[2], cols[3], np.full(len(rows), np.nan),
                         meta={"final_rho": v.reshape(rho.shape).copy()})
