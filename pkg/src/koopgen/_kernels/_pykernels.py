"""Pure-Python integration kernels.

Fallback for the compiled ``_ckernels`` module. The step logic, coefficient
table and floating-point operation order are kept identical to the Cython
source so that both backends produce the same trajectories.
"""
import math

import numpy as np

FIELD_VANDERPOL = 0
FIELD_LINEAR = 1
FIELD_CUSTOM = 2

MAX_STEPS = 1_000_000
_EPS = 2.220446049250313e-16

# Dormand-Prince 5(4)
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                           49.0 / 176.0, -5103.0 / 18656.0)
A71, A73, A74, A75, A76 = (35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0,
                           -2187.0 / 6784.0, 11.0 / 84.0)
E1, E3, E4, E5, E6, E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                          -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)

# PI step control (Hairer's DOPRI5 defaults)
EXPO1 = 0.17
BETA = 0.04
SAFE = 0.9
FAC_MAX_INV = 5.0   # h shrinks by at most 5x
FAC_MIN_INV = 0.1   # h grows by at most 10x
FACOLD_MIN = 1e-4


def make_field(kind, sign, rate, func=None):
    """Return ``f(x) -> list`` for a built-in field code or a user callable."""
    if kind == FIELD_VANDERPOL:
        def f(x):
            x0 = x[0]
            x1 = x[1]
            return [sign * x1, sign * (-x0 + (1.0 - x0 * x0) * x1)]
    elif kind == FIELD_LINEAR:
        def f(x):
            return [sign * (rate * xi) for xi in x]
    else:
        if func is None:
            raise ValueError("custom field requires a callable")

        def f(x):
            return [sign * float(v) for v in func(np.asarray(x, dtype=float))]
    return f


def _ipow(v, e):
    r = 1.0
    for _ in range(e):
        r *= v
    return r


def make_dictionary(exps, coef, owner, n_obs):
    exps = [[int(e) for e in row] for row in np.asarray(exps)]
    coef = [float(c) for c in np.asarray(coef)]
    owner = [int(o) for o in np.asarray(owner)]
    terms = list(zip(exps, coef, owner))

    def z(x):
        out = [0.0] * n_obs
        for row, c, o in terms:
            v = c
            for k, e in enumerate(row):
                v *= _ipow(x[k], e)
            out[o] += v
        return out
    return z


def _dopri(rhs, y, t, t1, h, rtol, atol, hmax, blowup, n_state):
    """Integrate ``y' = rhs(t, y)`` from t to t1 in place.

    Returns ``(status, h_next)``; status 0 ok, 1 blow-up, 2 step underflow,
    3 step budget exhausted.
    """
    dim = len(y)
    k1 = rhs(t, y)
    facold = FACOLD_MIN
    reject = False
    nstep = 0
    while t < t1:
        if nstep >= MAX_STEPS:
            return 3, h
        if h > hmax:
            h = hmax
        last = False
        if t + h >= t1:
            h = t1 - t
            last = True
        # a short final step is just the rest of the interval, not an underflow
        if not last and (h <= 16.0 * _EPS * abs(t) or h < 1e-300):
            return 2, h
        yt = [y[i] + h * (A21 * k1[i]) for i in range(dim)]
        k2 = rhs(t + C2 * h, yt)
        yt = [y[i] + h * (A31 * k1[i] + A32 * k2[i]) for i in range(dim)]
        k3 = rhs(t + C3 * h, yt)
        yt = [y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]) for i in range(dim)]
        k4 = rhs(t + C4 * h, yt)
        yt = [y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
              for i in range(dim)]
        k5 = rhs(t + C5 * h, yt)
        yt = [y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i]
                          + A65 * k5[i]) for i in range(dim)]
        k6 = rhs(t + h, yt)
        ynew = [y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i]
                            + A76 * k6[i]) for i in range(dim)]
        for v in ynew:
            if not math.isfinite(v):
                return 1, h
        k7 = rhs(t + h, ynew)
        nstep += 1

        acc = 0.0
        for i in range(dim):
            ei = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                      + E7 * k7[i])
            sk = atol + rtol * max(abs(y[i]), abs(ynew[i]))
            acc += (ei / sk) * (ei / sk)
        err = math.sqrt(acc / dim)
        if not math.isfinite(err):
            return 1, h

        fac11 = err ** EXPO1
        if err <= 1.0:
            fac = fac11 / facold ** BETA
            fac = max(FAC_MIN_INV, min(FAC_MAX_INV, fac / SAFE))
            hnew = h / fac
            facold = max(err, FACOLD_MIN)
            k1 = k7
            y[:] = ynew
            t = t1 if last else t + h
            nrm = 0.0
            for i in range(n_state):
                nrm += y[i] * y[i]
            if math.sqrt(nrm) > blowup:
                return 1, h
            if hnew > hmax:
                hnew = hmax
            if reject and hnew > h:
                hnew = h
            reject = False
            h = hnew
        else:
            h = h / min(FAC_MAX_INV, fac11 / SAFE)
            reject = True
    return 0, h


def flow_batch(kind, sign, rate, x0s, t, rtol, atol, max_step, blowup, func=None):
    """Flow every row of ``x0s`` forward by time ``t``."""
    f = make_field(kind, sign, rate, func)
    x0s = np.ascontiguousarray(x0s, dtype=float)
    m, n = x0s.shape
    out = x0s.copy()
    status = np.zeros(m, dtype=np.int32)
    if t == 0.0:
        return out, status

    def rhs(_s, y):
        return f(y)

    h0 = min(1e-3, t, max_step)
    for row in range(m):
        y = [float(v) for v in x0s[row]]
        st, _ = _dopri(rhs, y, 0.0, float(t), h0, rtol, atol, max_step, blowup, n)
        status[row] = st
        out[row] = y
    return out, status


def resolvent_batch(kind, sign, rate, exps, coef, owner, n_obs, x0s, lam, tau,
                    layer_end, rtol, atol, max_step, blowup, want_state, func=None):
    """Shifted truncated-resolvent integrals for every row of ``x0s``.

    For each start point x the returned row holds
    ``lam**2 * int_0^layer_end exp(-lam*s) * (z(phi(s, x)) - z(x)) ds``
    computed jointly with the state. When ``want_state`` is set the state is
    continued alone from ``layer_end`` to ``tau``.
    """
    f = make_field(kind, sign, rate, func)
    z = make_dictionary(exps, coef, owner, n_obs)
    x0s = np.ascontiguousarray(x0s, dtype=float)
    m, n = x0s.shape
    states = x0s.copy()
    integrals = np.zeros((m, n_obs))
    status = np.zeros(m, dtype=np.int32)
    lam2 = lam * lam

    def base_rhs(_s, y):
        return f(y)

    for row in range(m):
        x0 = [float(v) for v in x0s[row]]
        z0 = z(x0)

        def rhs(s, y):
            dx = f(y[:n])
            zy = z(y[:n])
            w = lam2 * math.exp(-lam * s)
            return dx + [w * (zy[i] - z0[i]) for i in range(n_obs)]

        y = x0 + [0.0] * n_obs
        h0 = min(1e-2 / lam, layer_end, max_step)
        st, h = _dopri(rhs, y, 0.0, layer_end, h0, rtol, atol, max_step, blowup, n)
        if st == 0 and want_state and layer_end < tau:
            ys = y[:n]
            st, _ = _dopri(base_rhs, ys, layer_end, tau, h, rtol, atol, max_step,
                           blowup, n)
            y[:n] = ys
        status[row] = st
        states[row] = y[:n]
        integrals[row] = y[n:]
    return states, integrals, status
