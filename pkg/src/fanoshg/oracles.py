"""Built-in consistency checks run by ``fanoshg validate``.

Every check returns an :class:`OracleResult`; none of them raise on a
failed comparison, so the whole table is always printed.
"""

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .analytics import (alpha2_bare, alpha2_single_qe, alpha2_two_qe,
                        single_qe_ceiling, solve_fixed_point)
from .dynamics import IntegratorConfig, integrate
from .errors import FanoSHGError
from .model import DynamicState, SystemParams, from_lab, rhs_lab, rhs_rotating, to_lab


@dataclass(frozen=True)
class OracleResult:
    name: str
    passed: bool
    metric: float
    threshold: float
    detail: str = ""


def reference_rhs_lab(state, params, t):
    """Second, scalar transcription of the lab-frame equations of motion.

    Written straight from the printed equations with plain ``complex``
    arithmetic; shares no code with the compiled kernel. Returns a tuple
    ``(da1, da2, dr1, dr2, de1, de2)``.
    """
    a1, a2, r1, r2 = state.alpha1, state.alpha2, state.rho_ge1, state.rho_ge2
    ee1, ee2 = state.rho_ee1, state.rho_ee2
    gg1, gg2 = 1.0 - ee1, 1.0 - ee2
    f1, f2, g = params.f1, params.f2, params.g
    chi, eps = params.chi2, params.eps_p
    c = complex.conjugate
    da1 = (-1j * params.omega1 - params.gamma1) * a1 - 2j * chi * c(a1) * a2 \
        + eps * cmath.exp(-1j * params.omega_drive * t)
    da2 = (-1j * params.omega2 - params.gamma2) * a2 - 1j * chi * a1 ** 2 \
        - 1j * f1 * r1 - 1j * f2 * r2
    dr1 = (-1j * params.omega_eg1 - params.gamma_ee1 / 2) * r1 \
        + 1j * c(f1) * a2 * (ee1 - gg1) + 1j * c(g) * (ee1 - gg1) * r2
    dr2 = (-1j * params.omega_eg2 - params.gamma_ee2 / 2) * r2 \
        + 1j * c(f2) * a2 * (ee2 - gg2) + 1j * c(g) * (ee2 - gg2) * r1
    de1 = -params.gamma_ee1 * ee1 + 1j * (f1 * c(a2) * r1 - c(f1) * a2 * c(r1)) \
        + 1j * (g * c(r2) * r1 - c(g) * r2 * c(r1))
    de2 = -params.gamma_ee2 * ee2 + 1j * (f2 * c(a2) * r2 - c(f2) * a2 * c(r2)) \
        + 1j * (g * c(r1) * r2 - c(g) * r1 * c(r2))
    return da1, da2, dr1, dr2, de1.real, de2.real


def random_params(rng, *, weak=False):
    """A random but physically sensible configuration."""
    def cplx(scale):
        return complex(*rng.uniform(-scale, scale, 2))
    return SystemParams(
        omega1=rng.uniform(0.9, 1.1), omega2=rng.uniform(1.9, 2.3),
        omega_eg1=rng.uniform(1.8, 2.4), omega_eg2=rng.uniform(1.8, 2.4),
        gamma1=rng.uniform(0.005, 0.05), gamma2=rng.uniform(0.005, 0.05),
        gamma_ee1=rng.uniform(1e-5, 1e-2), gamma_ee2=rng.uniform(1e-5, 1e-2),
        f1=cplx(0.2), f2=cplx(0.2), g=cplx(0.05 if weak else 0.2),
        chi2=rng.uniform(1e-5, 1e-3), eps_p=cplx(0.05),
    )


def random_state(rng, scale=1.0):
    z = rng.normal(size=4) + 1j * rng.normal(size=4)
    return DynamicState(*(scale * z), *rng.uniform(0.0, 1.0, 2))


def equivalence_panel(n=20, seed=2024):
    """Parameter sets for the fixed-point vs time-evolution comparison.

    Emitter decay is fast and the cooperativity |f|^2/(gamma2 gamma_eg) is
    kept low so the steady state is unique and attracting; drives are
    strong enough to pull the inversions well away from -1.
    """
    rng = np.random.default_rng(seed)
    panel = []
    for _ in range(n):
        panel.append(SystemParams(
            omega1=rng.uniform(0.98, 1.02), omega2=rng.uniform(2.0, 2.2),
            omega_eg1=rng.uniform(1.98, 2.12), omega_eg2=rng.uniform(1.98, 2.12),
            gamma1=rng.uniform(0.01, 0.05), gamma2=rng.uniform(0.01, 0.05),
            gamma_ee1=rng.uniform(5e-3, 3e-2), gamma_ee2=rng.uniform(5e-3, 3e-2),
            f1=complex(*rng.uniform(-0.05, 0.05, 2)), f2=complex(*rng.uniform(-0.05, 0.05, 2)),
            g=complex(*rng.uniform(-0.005, 0.005, 2)),
            chi2=1e-4, eps_p=rng.uniform(0.3, 1.5) * cmath.exp(1j * rng.uniform(0, 2 * math.pi)),
        ))
    return panel


#: tighter stepping than the default so the derivative test can reach 1e-9 on |alpha1| ~ 100
PANEL_INTEGRATOR = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-13, t_max=1e6)


def max_rel(a, b, floor=0.0):
    a, b = np.atleast_1d(np.asarray(a, complex)), np.atleast_1d(np.asarray(b, complex))
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    scale[scale == 0] = 1.0
    return float(np.max(np.abs(a - b) / scale))


# ---- individual oracles ----------------------------------------------------

def check_transcription(n=200, seed=1, tol=1e-12):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        p, s, t = random_params(rng), random_state(rng), rng.uniform(0, 100)
        ref = reference_rhs_lab(s, p, t)
        got = rhs_lab(s, p, t).to_array()
        scale = max(max(abs(v) for v in ref), 1e-300)
        worst = max(worst, float(np.max(np.abs(got - np.array(ref))) / scale))
    return OracleResult("rhs transcription", worst <= tol, worst, tol)


def frame_residual(state, params, t):
    """|rhs_rotating(E) - (from_lab(rhs_lab(to_lab(E))) + i k E)|, relative."""
    lab = rhs_lab(to_lab(state, t), params, t)
    back = from_lab(lab, t).to_array()
    k = np.array([1, 2, 2, 2, 0, 0]) * params.omega_drive
    expected = back + 1j * k * state.to_array()
    got = rhs_rotating(state, params).to_array()
    return max_rel(got, expected, floor=1e-300)


def check_frames(n=100, seed=2, tol=1e-10):
    rng = np.random.default_rng(seed)
    worst = max(frame_residual(random_state(rng), random_params(rng), rng.uniform(0, 1e3))
                for _ in range(n))
    return OracleResult("frame consistency", worst <= tol, worst, tol)


def check_reduction(n=1000, seed=3, tol=1e-12):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        p = random_params(rng)
        y = tuple(rng.uniform(-1, 1, 2))
        a1 = complex(*rng.normal(size=2))
        single = p.replace(f2=0j, g=0j)
        worst = max(worst, max_rel(alpha2_two_qe(single, y, a1),
                                   alpha2_single_qe(single, y[0], a1)))
        bare = p.decoupled()
        worst = max(worst, max_rel(alpha2_single_qe(bare, y[0], a1), alpha2_bare(bare, a1)),
                    max_rel(alpha2_two_qe(bare, y, a1), alpha2_bare(bare, a1)))
    return OracleResult("reduction chain", worst <= tol, worst, tol)


def ceiling_violation(params, y, alpha1=1.0):
    """Relative excess of the single-emitter amplitude over chi|a1|^2/gamma2."""
    bound = single_qe_ceiling(params, alpha1)
    return abs(alpha2_single_qe(params, y, alpha1)) / bound - 1.0


def check_ceiling(n=100_000, seed=4, tol=1e-9):
    rng = np.random.default_rng(seed)
    base = SystemParams(omega1=1.0, omega2=2.1, omega_eg1=2.1, omega_eg2=2.5,
                        gamma1=0.01, gamma2=0.01, gamma_ee1=1e-5, gamma_ee2=1e-5)
    worst = -math.inf
    fc = rng.uniform(-1, 1, (n, 2)) @ np.array([1, 1j])
    weg = rng.uniform(1.5, 2.5, n)
    ys = rng.uniform(-1, 0, n)
    om2 = rng.uniform(1.9, 2.3, n)
    gee = 10 ** rng.uniform(-6, -1, n)
    for i in range(n):
        p = base.replace(f1=complex(fc[i]), omega_eg1=float(weg[i]), omega2=float(om2[i]),
                         gamma_ee1=float(gee[i]))
        worst = max(worst, ceiling_violation(p, float(ys[i])))
    return OracleResult("single-emitter ceiling", worst <= tol, worst, tol,
                        f"{n} draws")


def compare_steady(params, config=None):
    """Max relative component mismatch between fixed point and time evolution.

    Returns ``None`` if either solver fails to converge.
    """
    try:
        te = integrate(params, config)
        fp = solve_fixed_point(params)
    except FanoSHGError:
        return None
    if not te.converged:
        return None
    return max_rel(te.components(), fp.components(), floor=1e-12)


def check_equivalence(n=5, seed=2024, tol=1e-3):
    panel = equivalence_panel(n, seed)
    errs = [compare_steady(p, PANEL_INTEGRATOR) for p in panel]
    done = [e for e in errs if e is not None]
    worst = max(done) if done else math.inf
    ok = bool(done) and worst <= tol
    return OracleResult("fixed point vs time evolution", ok, worst, tol,
                        f"{len(done)}/{n} converged")


ORACLES = (check_transcription, check_frames, check_reduction, check_ceiling, check_equivalence)


def run_all(quick=False):
    if quick:
        return [check_transcription(50), check_frames(30), check_reduction(200),
                check_ceiling(5000), check_equivalence(1)]
    return [oracle() for oracle in ORACLES]


def format_table(results):
    width = max(len(r.name) for r in results)
    lines = [f"{'oracle':<{width}}  result  {'metric':>10}  {'threshold':>9}  detail"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  "
                     f"{r.metric:>10.3e}  {r.threshold:>9.1e}  {r.detail}")
    return "\n".join(lines)
