"""Time evolution of the envelope equations to steady state."""

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import (NonFiniteError, NotConvergedError, ParameterError,
                     PopulationBoundError, StiffnessError)
from .model import DynamicState, Frame, Inversions, derivative_norm, from_lab, to_lab

log = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = (
    "t",
    "alpha1_re", "alpha1_im", "alpha2_re", "alpha2_im",
    "rho_ge1_re", "rho_ge1_im", "rho_ge2_re", "rho_ge2_im",
    "rho_ee1", "rho_ee2",
)

#: populations may stray this far outside [0, 1] before the run is aborted
POPULATION_TOL = 1e-9


@dataclass(frozen=True)
class IntegratorConfig:
    """Step control and stopping rule for :func:`integrate`.

    ``convergence_window=None`` picks ``20 / min(gamma_ee)`` capped at
    ``t_max / 10``, which spans many emitter lifetimes.
    """

    dt_initial: float = 1e-2
    rel_tol: float = 1e-8
    abs_tol: float = 1e-11
    t_max: float = 5e6
    convergence_window: float = None
    convergence_eps: float = 1e-9
    dt_min: float = 1e-6
    max_steps: int = 2_000_000_000

    def __post_init__(self):
        if not self.dt_initial > 0:
            raise ParameterError("dt_initial", "must be > 0")
        for name in ("rel_tol", "abs_tol", "convergence_eps", "dt_min"):
            if not getattr(self, name) > 0:
                raise ParameterError(name, "must be > 0")
        if not self.t_max > 0:
            raise ParameterError("t_max", "must be > 0")
        if self.convergence_window is not None and not (0 < self.convergence_window < self.t_max):
            raise ParameterError("convergence_window", "need 0 < convergence_window < t_max")

    def window_for(self, params):
        if self.convergence_window is not None:
            return self.convergence_window
        rate = min(params.gamma_ee1, params.gamma_ee2)
        window = 20.0 / rate if rate > 0 else math.inf
        return min(window, self.t_max / 10.0)


@dataclass(frozen=True)
class SteadyState:
    """Converged rotating-frame envelopes plus diagnostics."""

    alpha1_t: complex
    alpha2_t: complex
    rho_ge1_t: complex
    rho_ge2_t: complex
    rho_ee1: float
    rho_ee2: float
    residual: float
    converged: bool
    t_elapsed: float = 0.0
    method: str = "time_evolution"
    iterations: int = 0
    inversions: Inversions = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "inversions", Inversions.from_populations(self.rho_ee1, self.rho_ee2))

    @classmethod
    def from_state(cls, state, residual, converged, **kw):
        return cls(state.alpha1, state.alpha2, state.rho_ge1, state.rho_ge2,
                   state.rho_ee1, state.rho_ee2, residual, converged, **kw)

    @property
    def state(self):
        return DynamicState(self.alpha1_t, self.alpha2_t, self.rho_ge1_t, self.rho_ge2_t,
                            self.rho_ee1, self.rho_ee2)

    def components(self):
        """The six steady-state quantities as a complex vector."""
        return self.state.to_array()


def _trajectory_row(t, s):
    return [t, s[0].real, s[0].imag, s[1].real, s[1].imag, s[2].real, s[2].imag,
            s[3].real, s[3].imag, s[4].real, s[5].real]


def write_trajectory(path, rows, digits=12):
    fmt = f"{{:.{digits}g}}"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_COLUMNS)
        for row in rows:
            writer.writerow([fmt.format(v) for v in row])


def integrate(params, config=None, *, dump_path=None, sample_dt=None, csv_digits=12,
              initial=None):
    """Evolve the rotating-frame equations from the all-zero state until steady.

    Returns a :class:`SteadyState`; ``converged`` is False (with best-effort
    values) when ``t_max`` is reached first. Raises :class:`NonFiniteError`
    on blow-up and :class:`StiffnessError` if the step size collapses.
    """
    config = config or IntegratorConfig()
    p = params.packed()
    window = config.window_for(params)
    s = (initial.to_array() if initial is not None else np.zeros(6, np.complex128))
    t = 0.0
    h = config.dt_initial
    quiet_since = 0.0
    rows = []
    if dump_path is not None:
        sample_dt = sample_dt or config.t_max / 2000.0
        rows.append(_trajectory_row(t, s))
    chunk = sample_dt if dump_path is not None else config.t_max / 100.0
    n_steps = 0
    status = K.ST_REACHED
    while t < config.t_max:
        t_end = min(t + chunk, config.t_max)
        s_new, t_new, h, status, quiet_since, n_acc, n_rej, dnorm = K.dopri_advance(
            K.MODE_ROTATING, s, t, t_end, h, p, config.rel_tol, config.abs_tol, config.dt_min,
            config.convergence_eps, window, quiet_since, POPULATION_TOL,
            config.max_steps - n_steps)
        n_steps += n_acc + n_rej
        if status == K.ST_NONFINITE:
            raise NonFiniteError(f"non-finite state at t={t_new:.6g}", t_new,
                                 DynamicState.from_array(s_new))
        if status == K.ST_POPULATION:
            raise PopulationBoundError(
                f"population left [0, 1] at t={t_new:.6g}: "
                f"rho_ee=({s_new[4].real:.3g}, {s_new[5].real:.3g})",
                t_new, DynamicState.from_array(s_new))
        if status == K.ST_STEP_COLLAPSE:
            raise StiffnessError(
                f"step size collapsed to {h:.3g} at t={t_new:.6g}; "
                "try the fixed-point steady-state solver instead",
                t_new, DynamicState.from_array(s_new), h)
        s, t = s_new, t_new
        if dump_path is not None:
            rows.append(_trajectory_row(t, s))
        if status in (K.ST_CONVERGED, K.ST_MAX_STEPS):
            break
    if dump_path is not None:
        write_trajectory(dump_path, rows, csv_digits)
    state = DynamicState.from_array(s)
    converged = status == K.ST_CONVERGED
    if not converged:
        log.info("integration stopped at t=%.6g without convergence", t)
    return SteadyState.from_state(state, derivative_norm(state, params), converged,
                                  t_elapsed=t, method="time_evolution", iterations=n_steps)


def evolve(params, initial, times, frame=Frame.ROTATING, rtol=1e-10, atol=1e-13, dt_initial=1e-3):
    """States at each of ``times`` (ascending, starting at the initial time) via adaptive steps."""
    mode = K.MODE_LAB if frame is Frame.LAB else K.MODE_ROTATING
    p = params.packed()
    s = initial.to_array()
    out = [initial]
    h = dt_initial
    for t0, t1 in zip(times[:-1], times[1:]):
        s, _, h, status, *_ = K.dopri_advance(mode, s, float(t0), float(t1), h, p, rtol, atol,
                                              1e-14, 0.0, 0.0, 0.0, np.inf, 2_000_000_000)
        if status not in (K.ST_REACHED,):
            raise NonFiniteError(f"evolution failed (status {status}) before t={t1}", t0,
                                 DynamicState.from_array(s))
        out.append(DynamicState.from_array(s))
    return out


_FIXED_METHODS = {"rk4": 0, "dp5": 1}


def integrate_fixed(params, t_end, n_steps, method="rk4", frame=Frame.ROTATING,
                    initial=None, t0=0.0):
    """Fixed-step march, used for order checks and as a validation fallback."""
    mode = K.MODE_LAB if frame is Frame.LAB else K.MODE_ROTATING
    s0 = (initial or DynamicState.zero()).to_array()
    s = K.fixed_advance(mode, s0, float(t0), float(t_end), int(n_steps), params.packed(),
                        _FIXED_METHODS[method])
    return DynamicState.from_array(s)


def verify_ansatz(params, steady, t_probe_count=16, rtol=1e-12, atol=1e-15, abs_floor=1e-9):
    """Check that a converged solution really is of the slowly varying form.

    Starting from the converged envelopes, the lab-frame equations (with the
    explicit carrier) are integrated over one drive period. At each probe
    time the carrier is stripped again and compared with the start value.
    Returns the largest relative deviation over all six components.
    """
    if not steady.converged:
        raise NotConvergedError("verify_ansatz needs a converged steady state", steady)
    period = 2.0 * math.pi / params.omega_drive
    times = np.linspace(0.0, period, t_probe_count + 1)
    start = steady.state
    states = evolve(params, to_lab(start, 0.0), times, frame=Frame.LAB, rtol=rtol, atol=atol)
    ref = start.to_array()
    scale = np.maximum(np.abs(ref), abs_floor)
    worst = 0.0
    for t, lab in zip(times[1:], states[1:]):
        env = from_lab(lab, t).to_array()
        worst = max(worst, float(np.max(np.abs(env - ref) / scale)))
    return worst
