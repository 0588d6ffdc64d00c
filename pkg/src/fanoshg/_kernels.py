"""Compiled right-hand sides and Runge-Kutta drivers.

State vectors are complex128 arrays of length 6 laid out as
``[alpha1, alpha2, rho_ge1, rho_ge2, rho_ee1, rho_ee2]``; the two populations
are carried with zero imaginary part. Parameters travel as a flat float64
vector (see ``PARAM_LAYOUT``) so that the kernels stay free of Python objects.
"""

import numpy as np
from numba import njit

PARAM_LAYOUT = (
    "omega1", "omega2", "omega_eg1", "omega_eg2",
    "gamma1", "gamma2", "gamma_ee1", "gamma_ee2",
    "chi2",
    "f1_re", "f1_im", "f2_re", "f2_im", "g_re", "g_im",
    "eps_re", "eps_im",
    "omega_drive",
    "sign_emitter_source",
)
N_PARAMS = len(PARAM_LAYOUT)

MODE_ROTATING = 0
MODE_LAB = 1

# status codes returned by the adaptive driver
ST_REACHED = 0
ST_CONVERGED = 1
ST_NONFINITE = 2
ST_STEP_COLLAPSE = 3
ST_POPULATION = 4
ST_MAX_STEPS = 5


@njit(cache=True, nogil=True)
def rhs_rotating(s, p):
    w = p[17]
    f1 = p[9] + 1j * p[10]
    f2 = p[11] + 1j * p[12]
    gc = p[13] - 1j * p[14]  # g*
    eps = p[15] + 1j * p[16]
    chi = p[8]
    a1 = s[0]
    a2 = s[1]
    r1 = s[2]
    r2 = s[3]
    e1 = s[4].real
    e2 = s[5].real
    y1 = 2.0 * e1 - 1.0
    y2 = 2.0 * e2 - 1.0
    out = np.empty(6, np.complex128)
    out[0] = (-1j * (p[0] - w) - p[4]) * a1 - 2j * chi * np.conj(a1) * a2 + eps
    out[1] = ((-1j * (p[1] - 2.0 * w) - p[5]) * a2 - 1j * chi * a1 * a1
              + p[18] * (-1j * f1 * r1 - 1j * f2 * r2))
    out[2] = ((-1j * (p[2] - 2.0 * w) - 0.5 * p[6]) * r1
              + 1j * np.conj(f1) * a2 * y1 + 1j * gc * y1 * r2)
    out[3] = ((-1j * (p[3] - 2.0 * w) - 0.5 * p[7]) * r2
              + 1j * np.conj(f2) * a2 * y2 + 1j * gc * y2 * r1)
    # population drive written as i(W* rho - W rho*) with W = f* alpha2 + g* rho_other
    w1 = np.conj(f1) * a2 + gc * r2
    w2 = np.conj(f2) * a2 + gc * r1
    out[4] = -p[6] * e1 + (1j * (np.conj(w1) * r1 - w1 * np.conj(r1))).real
    out[5] = -p[7] * e2 + (1j * (np.conj(w2) * r2 - w2 * np.conj(r2))).real
    return out


@njit(cache=True, nogil=True)
def rhs_lab(t, s, p):
    w = p[17]
    f1 = p[9] + 1j * p[10]
    f2 = p[11] + 1j * p[12]
    gc = p[13] - 1j * p[14]
    eps = p[15] + 1j * p[16]
    chi = p[8]
    a1 = s[0]
    a2 = s[1]
    r1 = s[2]
    r2 = s[3]
    e1 = s[4].real
    e2 = s[5].real
    y1 = 2.0 * e1 - 1.0
    y2 = 2.0 * e2 - 1.0
    out = np.empty(6, np.complex128)
    out[0] = (-1j * p[0] - p[4]) * a1 - 2j * chi * np.conj(a1) * a2 + eps * np.exp(-1j * w * t)
    out[1] = ((-1j * p[1] - p[5]) * a2 - 1j * chi * a1 * a1
              + p[18] * (-1j * f1 * r1 - 1j * f2 * r2))
    out[2] = (-1j * p[2] - 0.5 * p[6]) * r1 + 1j * np.conj(f1) * a2 * y1 + 1j * gc * y1 * r2
    out[3] = (-1j * p[3] - 0.5 * p[7]) * r2 + 1j * np.conj(f2) * a2 * y2 + 1j * gc * y2 * r1
    w1 = np.conj(f1) * a2 + gc * r2
    w2 = np.conj(f2) * a2 + gc * r1
    out[4] = -p[6] * e1 + (1j * (np.conj(w1) * r1 - w1 * np.conj(r1))).real
    out[5] = -p[7] * e2 + (1j * (np.conj(w2) * r2 - w2 * np.conj(r2))).real
    return out


@njit(cache=True, nogil=True)
def _f(mode, t, s, p):
    if mode == MODE_LAB:
        return rhs_lab(t, s, p)
    return rhs_rotating(s, p)


# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                           49.0 / 176.0, -5103.0 / 18656.0)
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                          -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)


@njit(cache=True, nogil=True)
def _all_finite(s):
    for i in range(s.shape[0]):
        if not (np.isfinite(s[i].real) and np.isfinite(s[i].imag)):
            return False
    return True


@njit(cache=True, nogil=True)
def _max_abs(v):
    m = 0.0
    for i in range(v.shape[0]):
        a = abs(v[i])
        if a > m:
            m = a
    return m


@njit(cache=True, nogil=True)
def dopri_advance(mode, s0, t0, t_end, h0, p, rtol, atol, h_min,
                  conv_eps, window, quiet_since, pop_tol, max_steps):
    """Advance with Dormand-Prince 5(4) and a PI step controller.

    Returns ``(state, t, h, status, quiet_since, n_accepted, n_rejected, deriv_norm)``.
    Convergence (rotating frame only) means the max-norm of the derivative has
    stayed below ``conv_eps`` for a stretch of length ``window``; pass
    ``conv_eps <= 0`` to disable it.
    """
    beta = 0.04
    expo1 = 0.2 - 0.75 * beta
    safe = 0.9
    facmin = 0.2
    facmax = 10.0
    facold = 1e-4

    s = s0.copy()
    t = t0
    h = h0
    k1 = _f(mode, t, s, p)
    dnorm = _max_abs(k1)
    n_acc = 0
    n_rej = 0
    nonfinite_reject = False
    check_conv = conv_eps > 0.0 and mode == MODE_ROTATING
    if check_conv and dnorm >= conv_eps:
        quiet_since = t

    while t < t_end:
        if n_acc + n_rej >= max_steps:
            return s, t, h, ST_MAX_STEPS, quiet_since, n_acc, n_rej, dnorm
        last = False
        h_prop = h
        if t + h >= t_end:
            h = t_end - t
            last = True
        k2 = _f(mode, t + C2 * h, s + h * A21 * k1, p)
        k3 = _f(mode, t + C3 * h, s + h * (A31 * k1 + A32 * k2), p)
        k4 = _f(mode, t + C4 * h, s + h * (A41 * k1 + A42 * k2 + A43 * k3), p)
        k5 = _f(mode, t + C5 * h, s + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4), p)
        k6 = _f(mode, t + h, s + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5), p)
        sn = s + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
        k7 = _f(mode, t + h, sn, p)
        if not (_all_finite(sn) and _all_finite(k7)):
            n_rej += 1
            nonfinite_reject = True
            h *= 0.1
            if h < h_min:
                return s, t, h, ST_NONFINITE, quiet_since, n_acc, n_rej, dnorm
            continue
        err = 0.0
        for i in range(6):
            sc = atol + rtol * max(abs(s[i]), abs(sn[i]))
            e = abs(h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i]
                         + E6 * k6[i] + E7 * k7[i])) / sc
            err += e * e
        err = np.sqrt(err / 6.0)
        if err <= 1.0:
            # PI controller
            fac11 = err ** expo1 if err > 0.0 else 0.0
            fac = fac11 / facold ** beta / safe
            fac = max(1.0 / facmax, min(1.0 / facmin, fac))
            facold = max(err, 1e-4)
            t = t_end if last else t + h
            s = sn
            k1 = k7
            n_acc += 1
            nonfinite_reject = False
            e1 = s[4].real
            e2 = s[5].real
            if (e1 < -pop_tol or e1 > 1.0 + pop_tol or e2 < -pop_tol or e2 > 1.0 + pop_tol):
                return s, t, h, ST_POPULATION, quiet_since, n_acc, n_rej, dnorm
            dnorm = _max_abs(k1)
            if check_conv:
                if dnorm >= conv_eps:
                    quiet_since = t
                elif t - quiet_since >= window:
                    return s, t, h, ST_CONVERGED, quiet_since, n_acc, n_rej, dnorm
            h = h / fac if fac > 0.0 else h * facmax
            if last:
                # clipping to land on t_end says nothing about the local scale
                h = max(h, h_prop)
                break
        else:
            n_rej += 1
            h = h / min(1.0 / facmin, err ** expo1 / safe)
        if h < h_min:
            status = ST_NONFINITE if nonfinite_reject else ST_STEP_COLLAPSE
            return s, t, h, status, quiet_since, n_acc, n_rej, dnorm
    return s, t, h, ST_REACHED, quiet_since, n_acc, n_rej, dnorm


@njit(cache=True, nogil=True)
def fixed_advance(mode, s0, t0, t_end, n_steps, p, method):
    """Fixed-step march: method 0 = classical RK4, 1 = Dormand-Prince 5th-order solution."""
    s = s0.copy()
    h = (t_end - t0) / n_steps
    t = t0
    for _ in range(n_steps):
        if method == 0:
            k1 = _f(mode, t, s, p)
            k2 = _f(mode, t + 0.5 * h, s + 0.5 * h * k1, p)
            k3 = _f(mode, t + 0.5 * h, s + 0.5 * h * k2, p)
            k4 = _f(mode, t + h, s + h * k3, p)
            s = s + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        else:
            k1 = _f(mode, t, s, p)
            k2 = _f(mode, t + C2 * h, s + h * A21 * k1, p)
            k3 = _f(mode, t + C3 * h, s + h * (A31 * k1 + A32 * k2), p)
            k4 = _f(mode, t + C4 * h, s + h * (A41 * k1 + A42 * k2 + A43 * k3), p)
            k5 = _f(mode, t + C5 * h, s + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4), p)
            k6 = _f(mode, t + h, s + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5), p)
            s = s + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
        t = t0 + (_ + 1) * h
    return s
