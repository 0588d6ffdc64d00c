"""Domain types and equations of motion for the emitter/plasmon SHG system.

Two plasmon modes (``alpha1`` near the drive frequency, ``alpha2`` near its
second harmonic) are coupled through a chi(2) term; two two-level emitters
couple to ``alpha2`` and to each other. All frequencies and rates are in
units of the drive frequency, time in units of its inverse.
"""

import contextlib
import dataclasses
import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ParameterError

#: tolerance used by :meth:`DynamicState.purity_violation`
PURITY_TOL = 1e-6

_FAULTS = {"flip-emitter-source": False}


@contextlib.contextmanager
def injected_fault(name):
    """Test hook: temporarily corrupt the equations of motion.

    ``"flip-emitter-source"`` flips the sign of the emitter feedback term in the
    ``alpha2`` equation. Used to check that the oracle suite notices.
    """
    if name not in _FAULTS:
        raise KeyError(f"unknown fault {name!r}; known: {sorted(_FAULTS)}")
    old = _FAULTS[name]
    _FAULTS[name] = True
    try:
        yield
    finally:
        _FAULTS[name] = old


@dataclass(frozen=True)
class SystemParams:
    """Fixed physical constants of one configuration.

    Couplings ``f1``, ``f2``, ``g`` and the drive ``eps_p`` are complex. The
    emitter coherence damping is not an input: it is always half the
    population decay rate (``gamma_eg = gamma_ee / 2``).
    """

    omega1: float
    omega2: float
    omega_eg1: float
    omega_eg2: float
    gamma1: float
    gamma2: float
    gamma_ee1: float
    gamma_ee2: float
    f1: complex = 0j
    f2: complex = 0j
    g: complex = 0j
    chi2: float = 1e-4
    eps_p: complex = 0j
    omega_drive: float = 1.0

    def __post_init__(self):
        for name in ("omega1", "omega2", "omega_eg1", "omega_eg2", "gamma1", "gamma2",
                     "gamma_ee1", "gamma_ee2", "chi2", "omega_drive"):
            value = getattr(self, name)
            if isinstance(value, complex) or not math.isfinite(float(value)):
                raise ParameterError(name, f"must be a finite real number, got {value!r}")
            object.__setattr__(self, name, float(value))
        for name in ("f1", "f2", "g", "eps_p"):
            value = complex(getattr(self, name))
            if not (math.isfinite(value.real) and math.isfinite(value.imag)):
                raise ParameterError(name, f"must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        for name in ("omega1", "omega2", "omega_eg1", "omega_eg2"):
            if getattr(self, name) <= 0:
                raise ParameterError(name, "frequencies must be > 0")
        for name in ("gamma1", "gamma2", "gamma_ee1", "gamma_ee2", "chi2"):
            if getattr(self, name) < 0:
                raise ParameterError(name, "rates must be >= 0")
        if self.omega_drive != 1.0:
            raise ParameterError("omega_drive", "all frequencies are scaled by the drive; it must be 1.0")

    @property
    def gamma_eg1(self):
        return self.gamma_ee1 / 2.0

    @property
    def gamma_eg2(self):
        return self.gamma_ee2 / 2.0

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def decoupled(self):
        """Copy with every emitter coupling switched off (the bare converter)."""
        return self.replace(f1=0j, f2=0j, g=0j)

    def to_dict(self):
        return {field.name: getattr(self, field.name) for field in dataclasses.fields(self)}

    def packed(self):
        """Flat float vector consumed by the compiled kernels."""
        p = np.empty(_kernels.N_PARAMS)
        p[:] = (
            self.omega1, self.omega2, self.omega_eg1, self.omega_eg2,
            self.gamma1, self.gamma2, self.gamma_ee1, self.gamma_ee2,
            self.chi2,
            self.f1.real, self.f1.imag, self.f2.real, self.f2.imag, self.g.real, self.g.imag,
            self.eps_p.real, self.eps_p.imag,
            self.omega_drive,
            -1.0 if _FAULTS["flip-emitter-source"] else 1.0,
        )
        return p


class Frame(enum.Enum):
    LAB = "lab"
    ROTATING = "rotating"


@dataclass(frozen=True)
class Inversions:
    y1: float
    y2: float

    @classmethod
    def from_populations(cls, rho_ee1, rho_ee2):
        return cls(2.0 * rho_ee1 - 1.0, 2.0 * rho_ee2 - 1.0)

    def __iter__(self):
        yield self.y1
        yield self.y2


@dataclass(frozen=True)
class DynamicState:
    """The six evolving quantities; ``rho_gg = 1 - rho_ee`` is implied.

    Also used for time derivatives, in which case the population slots hold
    real rates of change.
    """

    alpha1: complex = 0j
    alpha2: complex = 0j
    rho_ge1: complex = 0j
    rho_ge2: complex = 0j
    rho_ee1: float = 0.0
    rho_ee2: float = 0.0

    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def from_array(cls, a):
        return cls(complex(a[0]), complex(a[1]), complex(a[2]), complex(a[3]),
                   float(np.real(a[4])), float(np.real(a[5])))

    def to_array(self):
        return np.array([self.alpha1, self.alpha2, self.rho_ge1, self.rho_ge2,
                         self.rho_ee1, self.rho_ee2], dtype=np.complex128)

    @property
    def inversions(self):
        return Inversions.from_populations(self.rho_ee1, self.rho_ee2)

    def purity_violation(self, tol=PURITY_TOL):
        """Largest excess of ``|rho_ge|^2`` over ``rho_ee * rho_gg`` beyond ``tol`` (0 if none)."""
        worst = 0.0
        for r, e in ((self.rho_ge1, self.rho_ee1), (self.rho_ge2, self.rho_ee2)):
            excess = abs(r) ** 2 - e * (1.0 - e) - tol
            worst = max(worst, excess)
        return worst


# phase multiplier order for each slot when going rotating -> lab: exp(-i k w t)
_HARMONIC = np.array([1.0, 2.0, 2.0, 2.0, 0.0, 0.0])


def _phases(t, omega=1.0):
    return np.exp(-1j * _HARMONIC * omega * t)


def to_lab(envelopes, t):
    """Attach the carrier phases to rotating-frame envelopes at time ``t``."""
    return DynamicState.from_array(envelopes.to_array() * _phases(t))


def from_lab(state, t):
    """Strip the carrier phases from a lab-frame state at time ``t``."""
    return DynamicState.from_array(state.to_array() * np.conj(_phases(t)))


def rhs_lab(state, params, t):
    """Lab-frame time derivative, including the explicit ``exp(-i w t)`` drive."""
    return DynamicState.from_array(_kernels.rhs_lab(float(t), state.to_array(), params.packed()))


def rhs_rotating(state, params):
    """Autonomous time derivative of the rotating-frame envelopes."""
    return DynamicState.from_array(_kernels.rhs_rotating(state.to_array(), params.packed()))


def derivative_norm(state, params):
    """Max-norm of :func:`rhs_rotating`; zero exactly at a steady state."""
    return float(np.max(np.abs(_kernels.rhs_rotating(state.to_array(), params.packed()))))
