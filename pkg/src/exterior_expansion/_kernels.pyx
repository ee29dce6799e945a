# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled branch inversion: solve G(w) = xi on a bracketed monotone branch."""

import numpy as np
cimport numpy as cnp
from libc.math cimport pow, atan, cos, sin, fabs, floor, isfinite, M_PI

cnp.import_array()

DEF MA = 0
DEF SMALL = 1
DEF INVERSE = 2
DEF INVERSE_ZERO = 3
DEF LARGE_RIGHT = 4
DEF LARGE_LEFT = 5
DEF SPL = 6


cdef inline double _pw(double x, double e) nogil:
    # integer exponents by repeated squaring, libm pow otherwise
    cdef int k
    cdef double r = 1.0, base = x
    if e == floor(e) and fabs(e) <= 64.0:
        k = <int>fabs(e)
        while k:
            if k & 1:
                r *= base
            base *= base
            k >>= 1
        return r if e >= 0.0 else 1.0 / r
    return pow(x, e)


cdef inline void _eval(int code, double n, double p, double w, double* g, double* dg) nogil:
    cdef double phi, q, m
    if code == MA:
        g[0] = _pw(w, n) - p
        dg[0] = n * _pw(w, n - 1.0)
    elif code == SMALL:
        g[0] = p * _pw(w, n) - _pw(w - 1.0, n)
        dg[0] = n * (p * _pw(w, n - 1.0) - _pw(w - 1.0, n - 1.0))
    elif code == INVERSE:
        g[0] = _pw(w, n) - n * _pw(w, n - 1.0)
        dg[0] = n * _pw(w, n - 2.0) * (w - (n - 1.0))
    elif code == INVERSE_ZERO:
        # odd extension sign(w)|w|^(n-1), monotone on the whole line
        g[0] = _pw(fabs(w), n - 1.0) * (1.0 if w >= 0.0 else -1.0)
        dg[0] = (n - 1.0) * _pw(fabs(w), n - 2.0)
    else:
        if code == LARGE_RIGHT:
            phi = M_PI / 4 + p - (n - 1.0) * (atan(w) - M_PI / 4)
        elif code == LARGE_LEFT:
            phi = M_PI / 4 + p - (n - 1.0) * (atan(w) + 3 * M_PI / 4)
        else:
            phi = p - (n - 1.0) * atan(w)
        q = w * w + 1.0
        m = _pw(q, 0.5 * (n - 1.0))
        g[0] = m * (w * cos(phi) - sin(phi))
        dg[0] = n * m * cos(phi)


def evaluate(int code, double n, double p, w):
    """Vectorised (G(w), G'(w))."""
    cdef cnp.ndarray[double, ndim=1] ws = np.ascontiguousarray(w, dtype=np.float64).ravel()
    cdef Py_ssize_t i, m = ws.shape[0]
    cdef cnp.ndarray[double, ndim=1] g = np.empty(m)
    cdef cnp.ndarray[double, ndim=1] dg = np.empty(m)
    cdef double gi, dgi
    for i in range(m):
        _eval(code, n, p, ws[i], &gi, &dgi)
        g[i] = gi
        dg[i] = dgi
    shape = np.shape(w)
    return g.reshape(shape), dg.reshape(shape)


cdef double _solve(int code, double n, double p, double xi, double lo, double hi,
                   double s, double rtol, int maxiter) nogil:
    cdef double w, g, dg, r, wn
    cdef int it
    # coarse bisection
    for it in range(maxiter):
        w = 0.5 * (lo + hi)
        if hi - lo <= 1e-3 * (fabs(w) if fabs(w) > 1.0 else 1.0):
            break
        _eval(code, n, p, w, &g, &dg)
        r = s * (g - xi)
        if r == 0.0:
            return w
        if r < 0.0:
            lo = w
        else:
            hi = w
    w = 0.5 * (lo + hi)
    # safeguarded Newton, stopping on a relative residual or a stalled step
    for it in range(maxiter):
        _eval(code, n, p, w, &g, &dg)
        r = g - xi
        if fabs(r) <= rtol * fabs(xi):
            return w
        if s * r < 0.0:
            lo = w
        else:
            hi = w
        if hi - lo <= 4.4e-16 * fabs(w):
            return w
        wn = w - r / dg if (dg != 0.0 and isfinite(dg)) else lo - 1.0
        if not (wn > lo and wn < hi):
            wn = 0.5 * (lo + hi)
        if fabs(wn - w) <= 2.2e-16 * fabs(w):
            return wn
        w = wn
    return w


def invert_branch(int code, double n, double p, xi, double w_lo, double w_hi,
                  bint increasing, double rtol=1e-15, int maxiter=200):
    """Solve G(w) = xi for each entry of ``xi`` inside the finite bracket [w_lo, w_hi]."""
    cdef cnp.ndarray[double, ndim=1] xs = np.ascontiguousarray(xi, dtype=np.float64).ravel()
    cdef Py_ssize_t i, m = xs.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(m)
    cdef double s = 1.0 if increasing else -1.0
    with nogil:
        for i in range(m):
            out[i] = _solve(code, n, p, xs[i], w_lo, w_hi, s, rtol, maxiter)
    return out.reshape(np.shape(xi))
