"""Two-well system definition, density-matrix helpers and the decoherence-time estimate.

Dynamics use natural units (hbar = 1).  The basis order is always
``(X, Y[, C])``: the deep well X, the shallow well Y and an absorbing
capture state C that only capture channels can populate.
"""

from dataclasses import dataclass
from enum import IntEnum
import math

import numpy as np
from scipy import constants

__all__ = [
    "Well",
    "WellSystem",
    "ZurekInputs",
    "DensityMatrixError",
    "build_hamiltonian",
    "pure_state",
    "population",
    "check_density_matrix",
    "analytic_rabi_py",
    "mean_y_occupancy",
    "epsilon_for_occupancy",
    "thermal_de_broglie_length",
    "zurek_decoherence_time",
    "PROTON_MASS",
]

HERMITIAN_TOL = 1e-10
EIGENVALUE_FLOOR = -1e-10
TRACE_TOL = 1e-9
IMAG_TOL = 1e-10

PROTON_MASS = constants.m_p


class DensityMatrixError(ValueError):
    """A matrix failed a density-matrix invariant (Hermiticity, positivity, trace)."""


class Well(IntEnum):
    X = 0
    Y = 1
    C = 2

    @classmethod
    def parse(cls, label):
        if isinstance(label, cls):
            return label
        if isinstance(label, str):
            try:
                return cls[label.upper()]
            except KeyError:
                raise ValueError(f"unknown basis label {label!r}") from None
        return cls(int(label))


@dataclass(frozen=True)
class WellSystem:
    """Double well with tunneling amplitude ``delta`` and bias ``epsilon``.

    ``epsilon`` is the energy of well Y relative to well X.  With
    ``include_capture_state`` the Hilbert space gains the inert state C.
    """

    delta: float
    epsilon: float = 0.0
    include_capture_state: bool = False

    def __post_init__(self):
        if not (self.delta >= 0 and math.isfinite(self.delta)):
            raise ValueError(f"delta must be finite and >= 0, got {self.delta}")
        if not math.isfinite(self.epsilon):
            raise ValueError(f"epsilon must be finite, got {self.epsilon}")

    @property
    def dim(self):
        return 3 if self.include_capture_state else 2

    @property
    def rabi_frequency(self):
        """Generalized Rabi frequency sqrt(delta**2 + epsilon**2)."""
        return math.hypot(self.delta, self.epsilon)

    @property
    def rabi_amplitude(self):
        """Peak well-Y population reached from pure X."""
        omega2 = self.delta ** 2 + self.epsilon ** 2
        return self.delta ** 2 / omega2 if omega2 > 0 else 0.0

    def with_capture_state(self, flag=True):
        return WellSystem(self.delta, self.epsilon, flag)


@dataclass(frozen=True)
class ZurekInputs:
    """Physical inputs (SI units) for the thermal decoherence-time estimate."""

    mass: float
    temperature: float
    displacement: float
    relaxation_time: float

    def __post_init__(self):
        for name in ("mass", "temperature", "displacement", "relaxation_time"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be finite and > 0, got {value}")


def build_hamiltonian(system):
    """Hamiltonian in the well basis.

    The coupling sign (-delta/2) is a convention; populations only depend on
    delta**2.  Row and column C are zero in the 3-level embedding.
    """
    H = np.zeros((system.dim, system.dim), dtype=complex)
    H[Well.Y, Well.Y] = system.epsilon
    H[Well.X, Well.Y] = H[Well.Y, Well.X] = -0.5 * system.delta
    return H


def pure_state(label, n=2):
    """Projector onto one basis vector of an ``n``-level space."""
    if n not in (2, 3):
        raise ValueError(f"dimension must be 2 or 3, got {n}")
    well = Well.parse(label)
    if well >= n:
        raise ValueError(f"label {well.name} is not part of a {n}-level basis")
    rho = np.zeros((n, n), dtype=complex)
    rho[well, well] = 1.0
    return rho


def population(rho, label):
    """Real diagonal entry for ``label``, clamped to [0, 1].

    Raises:
        DensityMatrixError: the diagonal entry carries an imaginary part of
            1e-10 or more, which only happens if the integrator went wrong.
    """
    rho = np.asarray(rho)
    well = Well.parse(label)
    if well >= rho.shape[0]:
        raise ValueError(f"label {well.name} is not part of a {rho.shape[0]}-level basis")
    value = complex(rho[well, well])
    if abs(value.imag) >= IMAG_TOL:
        raise DensityMatrixError(
            f"population({well.name}) has imaginary residue {value.imag:.3e}")
    return min(max(value.real, 0.0), 1.0)


def check_density_matrix(rho, unit_trace=True, check_trace=True):
    """Raise DensityMatrixError unless ``rho`` is a valid density matrix.

    With ``unit_trace`` false the trace may lie anywhere in [0, 1 + 1e-9]
    (the 2-level bookkeeping view of a leaky ensemble).  ``check_trace=False``
    skips the trace test entirely, for callers that police drift themselves.
    """
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] not in (2, 3):
        raise DensityMatrixError(f"expected a 2x2 or 3x3 matrix, got shape {rho.shape}")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > HERMITIAN_TOL:
        raise DensityMatrixError(f"not Hermitian (max deviation {herm:.3e})")
    lowest = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if lowest < EIGENVALUE_FLOOR:
        raise DensityMatrixError(f"negative eigenvalue {lowest:.3e}")
    if not check_trace:
        return rho
    tr = np.trace(rho).real
    if unit_trace and abs(tr - 1.0) > TRACE_TOL:
        raise DensityMatrixError(f"trace {tr!r} differs from 1")
    if not unit_trace and not (-TRACE_TOL <= tr <= 1.0 + TRACE_TOL):
        raise DensityMatrixError(f"trace {tr!r} outside [0, 1]")
    return rho


def analytic_rabi_py(delta, epsilon, t):
    """Closed-system well-Y population at time ``t`` starting from pure X.

    Works elementwise on array ``t``.
    """
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    omega2 = delta ** 2 + epsilon ** 2
    if omega2 == 0:
        return np.zeros_like(np.asarray(t, dtype=float))[()]
    omega = math.sqrt(omega2)
    return (delta ** 2 / omega2) * np.sin(0.5 * omega * np.asarray(t, dtype=float)) ** 2


def mean_y_occupancy(delta, epsilon):
    """Time average of :func:`analytic_rabi_py`: delta**2 / (2 (delta**2 + epsilon**2))."""
    omega2 = delta ** 2 + epsilon ** 2
    return 0.5 * delta ** 2 / omega2 if omega2 > 0 else 0.0


def epsilon_for_occupancy(delta, occupancy):
    """Bias giving a time-averaged well-Y occupancy of ``occupancy`` (< 1/2)."""
    if not 0 < occupancy < 0.5:
        raise ValueError(f"occupancy must lie in (0, 0.5), got {occupancy}")
    if delta <= 0:
        raise ValueError("delta must be positive to reach a nonzero occupancy")
    return delta * math.sqrt(1.0 / (2.0 * occupancy) - 1.0)


def thermal_de_broglie_length(mass, temperature):
    """hbar / sqrt(2 m k_B T) in meters."""
    return constants.hbar / math.sqrt(2.0 * mass * constants.k * temperature)


def zurek_decoherence_time(inputs):
    """High-temperature decoherence time tau_R * (lambda_dB / dx)**2 in seconds.

    The relaxation time is taken to be an NMR T1-style energy relaxation time;
    equating the two is a modelling assumption, not a measured identity.
    """
    ratio = thermal_de_broglie_length(inputs.mass, inputs.temperature) / inputs.displacement
    return inputs.relaxation_time * ratio * ratio
