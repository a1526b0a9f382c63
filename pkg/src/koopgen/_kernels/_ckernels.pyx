# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled integration kernels.

Same algorithm and operation order as ``_pykernels``; only the built-in
field codes are supported here. The batch loops run without the GIL so
callers may split a batch across threads.
"""
import numpy as np

from libc.math cimport exp, sqrt, fabs, pow, isfinite
from libc.stdlib cimport malloc, free

cdef long MAX_STEPS = 1000000
cdef double EPS = 2.220446049250313e-16

cdef double C2 = 1.0 / 5.0, C3 = 3.0 / 10.0, C4 = 4.0 / 5.0, C5 = 8.0 / 9.0
cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0, A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0, A42 = -56.0 / 15.0, A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0, A52 = -25360.0 / 2187.0
cdef double A53 = 64448.0 / 6561.0, A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0, A62 = -355.0 / 33.0, A63 = 46732.0 / 5247.0
cdef double A64 = 49.0 / 176.0, A65 = -5103.0 / 18656.0
cdef double A71 = 35.0 / 384.0, A73 = 500.0 / 1113.0, A74 = 125.0 / 192.0
cdef double A75 = -2187.0 / 6784.0, A76 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0, E3 = -71.0 / 16695.0, E4 = 71.0 / 1920.0
cdef double E5 = -17253.0 / 339200.0, E6 = 22.0 / 525.0, E7 = -1.0 / 40.0

cdef double EXPO1 = 0.17
cdef double BETA = 0.04
cdef double SAFE = 0.9
cdef double FAC_MAX_INV = 5.0
cdef double FAC_MIN_INV = 0.1
cdef double FACOLD_MIN = 1e-4


cdef struct Problem:
    int kind
    double sign
    double rate
    int n
    int n_obs          # 0 -> plain flow
    int n_terms
    const int* exps
    const double* coef
    const int* owner
    double lam
    double lam2
    double* z0
    double* zbuf


cdef inline double dmax(double a, double b) nogil:
    return a if a >= b else b


cdef inline double dmin(double a, double b) nogil:
    return a if a <= b else b


cdef inline double ipow(double v, int e) nogil:
    cdef double r = 1.0
    cdef int i
    for i in range(e):
        r *= v
    return r


cdef void field_eval(Problem* p, const double* x, double* dx) nogil:
    cdef int i
    cdef double x0, x1
    if p.kind == 0:
        x0 = x[0]
        x1 = x[1]
        dx[0] = p.sign * x1
        dx[1] = p.sign * (-x0 + (1.0 - x0 * x0) * x1)
    else:
        for i in range(p.n):
            dx[i] = p.sign * (p.rate * x[i])


cdef void dict_eval(Problem* p, const double* x, double* z) nogil:
    cdef int i, t, k
    cdef double v
    for i in range(p.n_obs):
        z[i] = 0.0
    for t in range(p.n_terms):
        v = p.coef[t]
        for k in range(p.n):
            v *= ipow(x[k], p.exps[t * p.n + k])
        z[p.owner[t]] += v


cdef void rhs(Problem* p, double s, const double* y, double* dy) nogil:
    cdef int i
    cdef double w
    field_eval(p, y, dy)
    if p.n_obs > 0:
        dict_eval(p, y, p.zbuf)
        w = p.lam2 * exp(-p.lam * s)
        for i in range(p.n_obs):
            dy[p.n + i] = w * (p.zbuf[i] - p.z0[i])


cdef int dopri(Problem* p, int dim, double* y, double t, double t1, double* hio,
               double rtol, double atol, double hmax, double blowup,
               double* work) nogil:
    cdef double* k1 = work
    cdef double* k2 = work + dim
    cdef double* k3 = work + 2 * dim
    cdef double* k4 = work + 3 * dim
    cdef double* k5 = work + 4 * dim
    cdef double* k6 = work + 5 * dim
    cdef double* k7 = work + 6 * dim
    cdef double* yt = work + 7 * dim
    cdef double* ynew = work + 8 * dim
    cdef double* tmp
    cdef double h = hio[0]
    cdef double facold = FACOLD_MIN
    cdef bint reject = False
    cdef bint last
    cdef long nstep = 0
    cdef int i
    cdef double acc, ei, sk, err, fac11, fac, hnew, nrm

    rhs(p, t, y, k1)
    while t < t1:
        if nstep >= MAX_STEPS:
            hio[0] = h
            return 3
        if h > hmax:
            h = hmax
        last = False
        if t + h >= t1:
            h = t1 - t
            last = True
        # a short final step is just the rest of the interval, not an underflow
        if not last and (h <= 16.0 * EPS * fabs(t) or h < 1e-300):
            hio[0] = h
            return 2
        for i in range(dim):
            yt[i] = y[i] + h * (A21 * k1[i])
        rhs(p, t + C2 * h, yt, k2)
        for i in range(dim):
            yt[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
        rhs(p, t + C3 * h, yt, k3)
        for i in range(dim):
            yt[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        rhs(p, t + C4 * h, yt, k4)
        for i in range(dim):
            yt[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        rhs(p, t + C5 * h, yt, k5)
        for i in range(dim):
            yt[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i]
                                + A65 * k5[i])
        rhs(p, t + h, yt, k6)
        for i in range(dim):
            ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i]
                                  + A76 * k6[i])
        for i in range(dim):
            if not isfinite(ynew[i]):
                hio[0] = h
                return 1
        rhs(p, t + h, ynew, k7)
        nstep += 1

        acc = 0.0
        for i in range(dim):
            ei = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                      + E7 * k7[i])
            sk = atol + rtol * dmax(fabs(y[i]), fabs(ynew[i]))
            acc += (ei / sk) * (ei / sk)
        err = sqrt(acc / dim)
        if not isfinite(err):
            hio[0] = h
            return 1

        fac11 = pow(err, EXPO1)
        if err <= 1.0:
            fac = fac11 / pow(facold, BETA)
            fac = dmax(FAC_MIN_INV, dmin(FAC_MAX_INV, fac / SAFE))
            hnew = h / fac
            facold = dmax(err, FACOLD_MIN)
            tmp = k1
            k1 = k7
            k7 = tmp
            for i in range(dim):
                y[i] = ynew[i]
            if last:
                t = t1
            else:
                t = t + h
            nrm = 0.0
            for i in range(p.n):
                nrm += y[i] * y[i]
            if sqrt(nrm) > blowup:
                hio[0] = h
                return 1
            if hnew > hmax:
                hnew = hmax
            if reject and hnew > h:
                hnew = h
            reject = False
            h = hnew
        else:
            h = h / dmin(FAC_MAX_INV, fac11 / SAFE)
            reject = True
    hio[0] = h
    return 0


def flow_batch(int kind, double sign, double rate, x0s, double t, double rtol,
               double atol, double max_step, double blowup, func=None):
    if kind not in (0, 1):
        raise ValueError("compiled backend supports built-in fields only")
    cdef double[:, ::1] out = np.array(x0s, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t m = out.shape[0]
    cdef int n = <int>out.shape[1]
    status_arr = np.zeros(m, dtype=np.int32)
    cdef int[::1] status = status_arr
    if t == 0.0:
        return np.asarray(out), status_arr
    cdef Problem p
    p.kind = kind
    p.sign = sign
    p.rate = rate
    p.n = n
    p.n_obs = 0
    p.n_terms = 0
    cdef double h0 = dmin(dmin(1e-3, t), max_step)
    cdef double h
    cdef Py_ssize_t row
    cdef double* work = <double*>malloc(9 * n * sizeof(double))
    if work == NULL:
        raise MemoryError()
    try:
        with nogil:
            for row in range(m):
                h = h0
                status[row] = dopri(&p, n, &out[row, 0], 0.0, t, &h, rtol, atol,
                                    max_step, blowup, work)
    finally:
        free(work)
    return np.asarray(out), status_arr


def resolvent_batch(int kind, double sign, double rate, exps, coef, owner, int n_obs,
                    x0s, double lam, double tau, double layer_end, double rtol,
                    double atol, double max_step, double blowup, bint want_state,
                    func=None):
    if kind not in (0, 1):
        raise ValueError("compiled backend supports built-in fields only")
    cdef double[:, ::1] x0v = np.ascontiguousarray(x0s, dtype=np.float64)
    cdef int[:, ::1] expv = np.ascontiguousarray(exps, dtype=np.int32)
    cdef double[::1] coefv = np.ascontiguousarray(coef, dtype=np.float64)
    cdef int[::1] ownerv = np.ascontiguousarray(owner, dtype=np.int32)
    cdef Py_ssize_t m = x0v.shape[0]
    cdef int n = <int>x0v.shape[1]
    cdef int dim = n + n_obs
    states_arr = np.array(x0v, copy=True)
    integrals_arr = np.zeros((m, n_obs))
    status_arr = np.zeros(m, dtype=np.int32)
    cdef double[:, ::1] states = states_arr
    cdef double[:, ::1] integrals = integrals_arr
    cdef int[::1] status = status_arr

    cdef Problem p
    p.kind = kind
    p.sign = sign
    p.rate = rate
    p.n = n
    p.n_obs = n_obs
    p.n_terms = <int>coefv.shape[0]
    p.exps = &expv[0, 0] if p.n_terms > 0 else NULL
    p.coef = &coefv[0] if p.n_terms > 0 else NULL
    p.owner = &ownerv[0] if p.n_terms > 0 else NULL
    p.lam = lam
    p.lam2 = lam * lam

    cdef Problem pb = p
    pb.n_obs = 0

    cdef double h0 = dmin(dmin(1e-2 / lam, layer_end), max_step)
    cdef double h
    cdef int st, i
    cdef Py_ssize_t row
    cdef double* work = <double*>malloc((9 * dim + dim + 2 * n_obs + 1) * sizeof(double))
    if work == NULL:
        raise MemoryError()
    cdef double* y = work + 9 * dim
    p.z0 = y + dim
    p.zbuf = p.z0 + n_obs
    try:
        with nogil:
            for row in range(m):
                for i in range(n):
                    y[i] = x0v[row, i]
                for i in range(n_obs):
                    y[n + i] = 0.0
                dict_eval(&p, y, p.z0)
                h = h0
                st = dopri(&p, dim, y, 0.0, layer_end, &h, rtol, atol, max_step,
                           blowup, work)
                if st == 0 and want_state and layer_end < tau:
                    st = dopri(&pb, n, y, layer_end, tau, &h, rtol, atol, max_step,
                               blowup, work)
                status[row] = st
                for i in range(n):
                    states[row, i] = y[i]
                for i in range(n_obs):
                    integrals[row, i] = y[n + i]
    finally:
        free(work)
    return states_arr, integrals_arr, status_arr
