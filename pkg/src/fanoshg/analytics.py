"""Closed-form steady-state amplitudes, the algebraic steady-state solver,
the enhancement factor and drive calibration."""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import SteadyState, integrate
from .errors import (DegenerateDenominatorError, NoBracketError, NoConvergenceError,
                     NotConvergedError)
from .model import DynamicState, derivative_norm

log = logging.getLogger(__name__)

#: |denominator| below this is treated as an exact pole
POLE_THRESHOLD = 1e-30

TIME_EVOLUTION = "time_evolution"
FIXED_POINT = "fixed_point"

#: the two spellings of the two-emitter coefficient, see :func:`alpha2_two_qe`
DERIVED = "derived"
PRINTED = "printed"


@dataclass(frozen=True)
class Shorthands:
    """Complex detuning/damping combinations of one parameter set."""

    xi1: complex
    xi2: complex
    beta1: complex
    beta2: complex

    @classmethod
    def of(cls, params):
        w = params.omega_drive
        return cls(
            xi1=complex(params.gamma1, params.omega1 - w),
            xi2=complex(params.gamma2, params.omega2 - 2 * w),
            beta1=complex(params.gamma_eg1, params.omega_eg1 - 2 * w),
            beta2=complex(params.gamma_eg2, params.omega_eg2 - 2 * w),
        )


def fano_shift(params, y):
    """The single-emitter term ``|f_c|^2 y / beta`` that competes with ``xi2``."""
    return abs(params.f1) ** 2 * y / Shorthands.of(params).beta1


@dataclass(frozen=True)
class EnhancementReport:
    alpha2_coupled: complex
    alpha2_bare: complex
    intensity_ratio: float
    chi2: float
    eps_p: complex
    method: str = TIME_EVOLUTION
    coupled: SteadyState = None
    bare: SteadyState = None

    @property
    def drive_context(self):
        return (self.chi2, self.eps_p)


def two_qe_denominator(params, y, form=DERIVED):
    y1, y2 = y
    sh = Shorthands.of(params)
    gc = params.g.conjugate()
    f1, f2 = params.f1, params.f2
    pair = sh.beta1 * sh.beta2 + y1 * y2 * gc ** 2
    if form == DERIVED:
        cross = 1j * y1 * y2 * gc * (f1.conjugate() * f2 + f2.conjugate() * f1)
    elif form == PRINTED:
        cross = 1j * y1 * y2 * gc * (f1 * f2.conjugate() - f2 * f1.conjugate())
    else:
        raise ValueError(f"unknown form {form!r}")
    return (y1 * abs(f1) ** 2 * sh.beta2 + y2 * abs(f2) ** 2 * sh.beta1) + cross - sh.xi2 * pair


def alpha2_two_qe(params, y, alpha1_t, form=DERIVED):
    """Steady SH amplitude with two emitters at given inversions.

    ``form="derived"`` eliminates the coherences from the steady-state
    linear subsystem exactly; its cross term is
    ``i y1 y2 g* (f1* f2 + f2* f1)``. ``form="printed"`` uses the textbook
    spelling ``i y1 y2 g* (f1 f2* - f2 f1*)``, which vanishes for real
    couplings and is *not* a consequence of the steady-state equations
    unless ``f1 f2* g`` vanishes. Both reduce to the single-emitter formula.
    """
    y1, y2 = y
    sh = Shorthands.of(params)
    gc = params.g.conjugate()
    den = two_qe_denominator(params, (y1, y2), form)
    if abs(den) < POLE_THRESHOLD:
        raise DegenerateDenominatorError(f"two-emitter denominator is {abs(den):.3g}", den)
    num = 1j * params.chi2 * (sh.beta1 * sh.beta2 + y1 * y2 * gc ** 2)
    return num / den * alpha1_t ** 2


def alpha2_single_qe(params, y, alpha1_t):
    """Steady SH amplitude with one emitter (coupling ``f1``, level ``omega_eg1``)."""
    sh = Shorthands.of(params)
    den = abs(params.f1) ** 2 * y / sh.beta1 - sh.xi2
    if abs(den) < POLE_THRESHOLD:
        raise DegenerateDenominatorError(f"single-emitter denominator is {abs(den):.3g}", den)
    return 1j * params.chi2 / den * alpha1_t ** 2


def alpha2_bare(params, alpha1_t):
    """SH amplitude of the converter alone."""
    return -1j * params.chi2 * alpha1_t ** 2 / Shorthands.of(params).xi2


def single_qe_ceiling(params, alpha1_t):
    """``chi2 |alpha1|^2 / gamma2``: the on-resonance bare value, unreachable-beyond with one emitter."""
    return params.chi2 * abs(alpha1_t) ** 2 / params.gamma2


def _linear_subsystem(params, sh, y1, y2, alpha1):
    """Solve the alpha2 / coherence equations for fixed inversions and pump."""
    f1, f2, gc = params.f1, params.f2, params.g.conjugate()
    m = np.array([
        [sh.xi2, 1j * f1, 1j * f2],
        [-1j * f1.conjugate() * y1, sh.beta1, -1j * gc * y1],
        [-1j * f2.conjugate() * y2, -1j * gc * y2, sh.beta2],
    ])
    rhs = np.array([-1j * params.chi2 * alpha1 ** 2, 0.0, 0.0])
    return np.linalg.solve(m, rhs)


def _pump_and_sh(params, sh, y1, y2, alpha1):
    """Pump amplitude and SH response for fixed inversions.

    With ``alpha2 = c * alpha1**2`` the pump balance reads
    ``alpha1 * (xi1 + 2i chi c |alpha1|^2) = eps``, a real cubic in
    ``|alpha1|^2``. ``alpha1=None`` means the undepleted first pass;
    otherwise the root closest to the previous ``|alpha1|^2`` is kept.
    """
    eps = params.eps_p
    if alpha1 is None:
        alpha1 = eps / sh.xi1
    else:
        c = _linear_subsystem(params, sh, y1, y2, 1.0)[0]
        z = 2j * params.chi2 * c
        coeffs = [abs(z) ** 2, 2 * (sh.xi1.conjugate() * z).real, abs(sh.xi1) ** 2, -abs(eps) ** 2]
        roots = np.roots(coeffs) if coeffs[0] != 0 or coeffs[1] != 0 else np.array([abs(eps) ** 2 / coeffs[2]])
        real = [r.real for r in roots if abs(r.imag) <= 1e-9 * max(1.0, abs(r)) and r.real >= 0]
        u = min(real, key=lambda r: abs(r - abs(alpha1) ** 2))
        alpha1 = eps / (sh.xi1 + z * u)
    a2, r1, r2 = _linear_subsystem(params, sh, y1, y2, alpha1)
    return complex(alpha1), complex(a2), complex(r1), complex(r2)


def _saturated_population(drive, beta):
    """Population of a damped two-level system under a steady effective drive."""
    s = abs(drive) ** 2 / abs(beta) ** 2 if beta != 0 else math.inf
    return 0.5 if math.isinf(s) else s / (1.0 + 2.0 * s)


def solve_fixed_point(params, init=None, max_iter=2000, tol=1e-12, relax=0.5, min_relax=1e-4):
    """Self-consistent steady state of the algebraic envelope equations.

    Each sweep fixes the inversions, solves the linear coherence/SH
    subsystem together with the pump equation (pump depletion included after
    an undepleted first pass), recomputes the populations from the
    population balance, and relaxes the inversions towards them. The
    relaxation factor is halved whenever the inversion update grows.
    """
    sh = Shorthands.of(params)
    if init is None:
        y1, y2 = -1.0, -1.0
        alpha1 = None
    else:
        y1, y2 = init.inversions
        alpha1 = init.alpha1_t
    gc = params.g.conjugate()
    prev = None
    prev_step = math.inf
    vec = None
    for it in range(1, max_iter + 1):
        alpha1, a2, r1, r2 = _pump_and_sh(params, sh, y1, y2, alpha1)
        e1 = _saturated_population(params.f1.conjugate() * a2 + gc * r2, sh.beta1)
        e2 = _saturated_population(params.f2.conjugate() * a2 + gc * r1, sh.beta2)
        t1, t2 = 2 * e1 - 1, 2 * e2 - 1
        step = max(abs(t1 - y1), abs(t2 - y2))
        if step > prev_step and relax > min_relax:
            relax = max(relax / 2, min_relax)
        prev_step = step
        vec = np.array([alpha1, a2, r1, r2, (1 + y1) / 2, (1 + y2) / 2])
        change = np.inf if prev is None else float(np.max(np.abs(vec - prev)))
        if change < tol and step < tol:
            state = DynamicState.from_array(vec)
            return SteadyState.from_state(state, derivative_norm(state, params), True,
                                          method=FIXED_POINT, iterations=it)
        prev = vec
        # a converged-in-y sweep still needs one more pass to confirm the amplitudes
        y1 += relax * (t1 - y1) if step > tol else (t1 - y1)
        y2 += relax * (t2 - y2) if step > tol else (t2 - y2)
    state = DynamicState.from_array(vec)
    last = SteadyState.from_state(state, derivative_norm(state, params), False,
                                  method=FIXED_POINT, iterations=max_iter)
    raise NoConvergenceError(f"fixed-point iteration did not converge in {max_iter} sweeps "
                             f"(residual {last.residual:.3g})", last)


def steady_state(params, method=TIME_EVOLUTION, config=None, init=None):
    """Dispatch to time evolution or the algebraic solver; always returns a converged result."""
    if method == TIME_EVOLUTION:
        result = integrate(params, config)
        if not result.converged:
            raise NotConvergedError(f"time evolution did not converge by t={result.t_elapsed:.4g} "
                                    f"(residual {result.residual:.3g})", result)
        return result
    if method == FIXED_POINT:
        return solve_fixed_point(params, init=init)
    raise ValueError(f"unknown method {method!r}")


def enhancement(params, method=TIME_EVOLUTION, config=None):
    """Steady SH intensity with the emitters coupled versus decoupled, same drive."""
    if params.chi2 == 0 or params.eps_p == 0:
        raise ValueError("enhancement is undefined when chi2 or eps_p vanishes")
    coupled = steady_state(params, method, config)
    bare = steady_state(params.decoupled(), method, config)
    ratio = abs(coupled.alpha2_t) ** 2 / abs(bare.alpha2_t) ** 2
    return EnhancementReport(coupled.alpha2_t, bare.alpha2_t, ratio, params.chi2, params.eps_p,
                             method, coupled, bare)


@dataclass(frozen=True)
class Calibration:
    params: object
    y2: float
    monotone: bool
    scan: tuple
    steady: SteadyState


def calibrate_drive_report(params, target_y2=-0.764, bracket=(1e-3, 2.0), method=FIXED_POINT,
                           chi2=None, tol=1e-3, n_scan=13, config=None, max_bisect=60):
    """Tune ``|eps_p|`` (phase kept) so the steady second-emitter inversion hits ``target_y2``."""
    if not -1.0 < target_y2 < 0.0:
        raise ValueError("target_y2 must lie in (-1, 0)")
    lo, hi = bracket
    if not 0 < lo < hi:
        raise ValueError("bracket must satisfy 0 < low < high")
    if chi2 is not None:
        params = params.replace(chi2=chi2)
    phase = params.eps_p / abs(params.eps_p) if params.eps_p != 0 else 1.0

    warm = [None]

    def solve(amp):
        trial = params.replace(eps_p=amp * phase)
        if method == FIXED_POINT:
            st = solve_fixed_point(trial, init=warm[0])
            warm[0] = st
        else:
            st = steady_state(trial, method, config)
        return trial, st

    amps = np.geomspace(lo, hi, n_scan)
    scan = []
    for a in amps:
        try:
            _, st = solve(a)
            scan.append((float(a), st.inversions.y2))
        except NotConvergedError:
            scan.append((float(a), math.nan))
    y2s = np.array([v for _, v in scan])
    finite = y2s[np.isfinite(y2s)]
    diffs = np.diff(finite)
    monotone = bool(np.all(diffs >= -1e-12) or np.all(diffs <= 1e-12))
    if not monotone:
        log.warning("y2 is not monotone in |eps_p| over the bracket %s", bracket)
    sign = np.sign(y2s - target_y2)
    pair = None
    for i in range(len(amps) - 1):
        if np.isfinite(y2s[i]) and np.isfinite(y2s[i + 1]) and sign[i] * sign[i + 1] <= 0:
            pair = (amps[i], amps[i + 1], sign[i])
            break
    if pair is None:
        raise NoBracketError(f"y2 - target does not change sign over |eps_p| in {bracket}; "
                             f"scanned y2 from {np.nanmin(y2s):.4g} to {np.nanmax(y2s):.4g}")
    a_lo, a_hi, s_lo = pair
    warm[0] = None
    trial, st = solve(a_lo)
    for _ in range(max_bisect):
        mid = math.sqrt(a_lo * a_hi)
        trial, st = solve(mid)
        d = st.inversions.y2 - target_y2
        if abs(d) <= tol / 10 or a_hi / a_lo - 1 < 1e-12:
            break
        if np.sign(d) == s_lo:
            a_lo = mid
        else:
            a_hi = mid
    if abs(st.inversions.y2 - target_y2) > tol:
        raise NoBracketError(f"bisection stalled at y2={st.inversions.y2:.6g}")
    return Calibration(trial, st.inversions.y2, monotone, tuple(scan), st)


def calibrate_drive(params, target_y2=-0.764, bracket=(1e-3, 2.0), **kw):
    """Return ``params`` with ``eps_p`` rescaled so the steady ``y2`` equals ``target_y2``."""
    return calibrate_drive_report(params, target_y2, bracket, **kw).params
