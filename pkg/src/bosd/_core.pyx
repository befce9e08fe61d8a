# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the run-length and segment recursions.

Mirrors ``bosd._kernels_py`` exactly; see that module for the contracts.
"""
from libc.math cimport exp, isfinite, log, log1p, lgamma, sqrt, INFINITY, M_PI
import numpy as np
from libc.stdlib cimport malloc, free

cdef double NEG_INF = -INFINITY


cdef inline double _logaddexp(double a, double b) nogil:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a > b:
        return a + log1p(exp(b - a))
    return b + log1p(exp(a - b))


cdef double _bocpd(const double[::1] log_pi, const double[::1] log_gamma,
                   const double[::1] log_h, const double[::1] log_1mh,
                   bint first, double[::1] out) noexcept nogil:
    cdef Py_ssize_t n = out.shape[0]
    cdef Py_ssize_t r
    cdef double mx, cp, s, v, log_e
    if first:
        out[0] = log_pi[0]
        for r in range(1, n):
            out[r] = NEG_INF
    else:
        mx = NEG_INF
        for r in range(n):
            v = log_h[r] + log_gamma[r]
            if v > mx:
                mx = v
        cp = NEG_INF
        if mx != NEG_INF:
            s = 0.0
            for r in range(n):
                s += exp(log_h[r] + log_gamma[r] - mx)
            cp = mx + log(s)
        out[0] = log_pi[0] + cp
        for r in range(1, n):
            out[r] = log_1mh[r - 1] + log_pi[r] + log_gamma[r - 1]
    mx = NEG_INF
    for r in range(n):
        if out[r] > mx:
            mx = out[r]
    if mx == NEG_INF or mx != mx:
        log_e = NEG_INF
    else:
        s = 0.0
        for r in range(n):
            s += exp(out[r] - mx)
        log_e = mx + log(s)
        for r in range(n):
            out[r] = out[r] - log_e
    return log_e


def bocpd_recursion(const double[::1] log_pi, const double[::1] log_gamma,
                    const double[::1] log_h, const double[::1] log_1mh,
                    bint first, double[::1] out):
    cdef double log_e
    with nogil:
        log_e = _bocpd(log_pi, log_gamma, log_h, log_1mh, first, out)
    return log_e


cdef double _bosd_core(const double[:, :, ::1] log_gamma, const double[:, :, :] log_pi3,
                       const double[:, ::1] log_pi2, bint shared,
                       const double[:, ::1] log_a, const double[:, ::1] log_dur,
                       const double[::1] log_init, bint first, double[:, :, ::1] out,
                       double[::1] rl, double[::1] res, double[::1] st) noexcept nogil:
    cdef Py_ssize_t k = out.shape[0]
    cdef Py_ssize_t dm = out.shape[1]
    cdef Py_ssize_t z, zp, di, r
    cdef double mx, s, v, e, log_e, lp
    cdef double *beta = <double *> malloc(k * sizeof(double))
    cdef double *eta = <double *> malloc(k * sizeof(double))

    if first:
        for z in range(k):
            beta[z] = log_init[z]
    else:
        for zp in range(k):
            v = NEG_INF
            for di in range(dm):
                v = _logaddexp(v, log_gamma[zp, di, di])
            eta[zp] = v
        for z in range(k):
            v = NEG_INF
            for zp in range(k):
                v = _logaddexp(v, eta[zp] + log_a[zp, z])
            beta[z] = v

    mx = NEG_INF
    for z in range(k):
        for di in range(dm):
            lp = log_pi2[z, 0] if shared else log_pi3[z, di, 0]
            v = log_dur[z, di] + lp + beta[z]
            out[z, di, 0] = v
            if v > mx:
                mx = v
            for r in range(1, di + 1):
                if first:
                    v = NEG_INF
                else:
                    lp = log_pi2[z, r] if shared else log_pi3[z, di, r]
                    v = log_gamma[z, di, r - 1] + lp
                out[z, di, r] = v
                if v > mx:
                    mx = v
            for r in range(di + 1, dm):
                out[z, di, r] = NEG_INF
    free(beta)
    free(eta)

    for r in range(dm):
        rl[r] = 0.0
        res[r] = 0.0
    for z in range(k):
        st[z] = 0.0
    if mx == NEG_INF or mx != mx:
        return NEG_INF

    s = 0.0
    for z in range(k):
        for di in range(dm):
            for r in range(di + 1):
                e = exp(out[z, di, r] - mx)
                s += e
                rl[r] += e
                res[di - r] += e
                st[z] += e
    log_e = mx + log(s)
    for r in range(dm):
        rl[r] /= s
        res[r] /= s
    for z in range(k):
        st[z] /= s
    for z in range(k):
        for di in range(dm):
            for r in range(di + 1):
                out[z, di, r] -= log_e
    return log_e


def bosd_recursion(const double[:, :, ::1] log_gamma, const double[:, :, :] log_pi,
                   const double[:, ::1] log_a, const double[:, ::1] log_dur,
                   const double[::1] log_init, bint first, double[:, :, ::1] out,
                   double[::1] rl, double[::1] res, double[::1] st):
    cdef double log_e
    with nogil:
        log_e = _bosd_core(log_gamma, log_pi, log_dur, False, log_a, log_dur, log_init,
                           first, out, rl, res, st)
    return log_e


def bosd_recursion_shared(const double[:, :, ::1] log_gamma, const double[:, ::1] log_pi,
                          const double[:, ::1] log_a, const double[:, ::1] log_dur,
                          const double[::1] log_init, bint first, double[:, :, ::1] out,
                          double[::1] rl, double[::1] res, double[::1] st):
    cdef double log_e
    with nogil:
        log_e = _bosd_core(log_gamma, log_gamma, log_pi, True, log_a, log_dur, log_init,
                           first, out, rl, res, st)
    return log_e


cdef void _niw_logpdf(const double[::1] y, const double[:, ::1] kappa, const double[:, ::1] nu,
                      const double[:, :, ::1] mu, const double[:, :, :, ::1] psi,
                      double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t k = out.shape[0]
    cdef Py_ssize_t n = out.shape[1]
    cdef Py_ssize_t m = y.shape[0]
    cdef Py_ssize_t z, r, i, j, q
    cdef double dof, scale, acc, half_logdet, maha
    cdef double *L = <double *> malloc(m * m * sizeof(double))
    cdef double *w = <double *> malloc(m * sizeof(double))
    for z in range(k):
        for r in range(n):
            dof = nu[z, r] - m + 1.0
            scale = (kappa[z, r] + 1.0) / (kappa[z, r] * dof)
            # Cholesky of psi, lower triangle in L
            half_logdet = 0.0
            for i in range(m):
                for j in range(i + 1):
                    acc = psi[z, r, i, j]
                    for q in range(j):
                        acc -= L[i * m + q] * L[j * m + q]
                    if i == j:
                        acc = sqrt(acc)
                        L[i * m + i] = acc
                        half_logdet += log(acc)
                    else:
                        L[i * m + j] = acc / L[j * m + j]
            # forward solve L w = y - mu
            maha = 0.0
            for i in range(m):
                acc = y[i] - mu[z, r, i]
                for q in range(i):
                    acc -= L[i * m + q] * w[q]
                w[i] = acc / L[i * m + i]
                maha += w[i] * w[i]
            maha /= scale
            half_logdet += 0.5 * m * log(scale)
            out[z, r] = (lgamma(0.5 * (dof + m)) - lgamma(0.5 * dof)
                         - 0.5 * m * log(dof * M_PI) - half_logdet
                         - 0.5 * (dof + m) * log1p(maha / dof))
    free(L)
    free(w)


def niw_logpdf(const double[::1] y, const double[:, ::1] kappa, const double[:, ::1] nu,
               const double[:, :, ::1] mu, const double[:, :, :, ::1] psi, double[:, ::1] out):
    with nogil:
        _niw_logpdf(y, kappa, nu, mu, psi, out)


cdef void _niw_update(const double[::1] y, double[:, ::1] kappa, double[:, ::1] nu,
                      double[:, :, ::1] mu, double[:, :, :, ::1] psi,
                      const double[::1] kappa0, const double[::1] nu0,
                      const double[:, ::1] mu0, const double[:, :, ::1] psi0) noexcept nogil:
    cdef Py_ssize_t k = kappa.shape[0]
    cdef Py_ssize_t n = kappa.shape[1]
    cdef Py_ssize_t m = y.shape[0]
    cdef Py_ssize_t z, r, i, j
    cdef double kp, ratio
    cdef double *diff = <double *> malloc(m * sizeof(double))
    for z in range(k):
        for r in range(n - 1, 0, -1):
            kp = kappa[z, r - 1]
            ratio = kp / (kp + 1.0)
            for i in range(m):
                diff[i] = y[i] - mu[z, r - 1, i]
            for i in range(m):
                for j in range(m):
                    psi[z, r, i, j] = psi[z, r - 1, i, j] + ratio * diff[i] * diff[j]
                mu[z, r, i] = (kp * mu[z, r - 1, i] + y[i]) / (kp + 1.0)
            nu[z, r] = nu[z, r - 1] + 1.0
            kappa[z, r] = kp + 1.0
        kappa[z, 0] = kappa0[z]
        nu[z, 0] = nu0[z]
        for i in range(m):
            mu[z, 0, i] = mu0[z, i]
            for j in range(m):
                psi[z, 0, i, j] = psi0[z, i, j]
    free(diff)


def niw_update(const double[::1] y, double[:, ::1] kappa, double[:, ::1] nu,
               double[:, :, ::1] mu, double[:, :, :, ::1] psi,
               const double[::1] kappa0, const double[::1] nu0,
               const double[:, ::1] mu0, const double[:, :, ::1] psi0):
    with nogil:
        _niw_update(y, kappa, nu, mu, psi, kappa0, nu0, mu0, psi0)


cdef class NiwRunLength:
    """Run-length filter state with a single-state conjugate Gaussian bank.

    Holds the posterior buffers and the bank arrays (shared, not copied) so a
    step costs one call.  ``step`` leaves everything untouched and returns
    ``-inf`` when the mass underflows.
    """
    cdef double[::1] log_h, log_1mh, kappa0, nu0, _cur, _nxt, _scratch
    cdef double[:, ::1] kappa, nu, mu0, _log_pi
    cdef double[:, :, ::1] mu, psi0
    cdef double[:, :, :, ::1] psi
    cdef object _arrays
    cdef Py_ssize_t m

    def __init__(self, log_h, log_1mh, log_gamma, kappa, nu, mu, psi, kappa0, nu0, mu0, psi0):
        self.log_h = log_h
        self.log_1mh = log_1mh
        self.kappa, self.nu, self.mu, self.psi = kappa, nu, mu, psi
        self.kappa0, self.nu0, self.mu0, self.psi0 = kappa0, nu0, mu0, psi0
        cur = np.array(log_gamma, dtype=np.float64)
        nxt = np.empty_like(cur)
        self._arrays = [cur, nxt]
        self._cur = cur
        self._nxt = nxt
        self._scratch = np.empty_like(cur)
        self._log_pi = np.empty((1, cur.shape[0]))
        self.m = mu.shape[2]

    @property
    def log_gamma(self):
        return self._arrays[0]

    cdef void _check(self, const double[::1] y) except *:
        cdef Py_ssize_t i
        if y.shape[0] != self.m:
            raise ValueError(f"observation has dimension {y.shape[0]}, expected {self.m}")
        for i in range(self.m):
            if not isfinite(y[i]):
                raise ValueError("observation has non-finite entries")

    def step(self, const double[::1] y, bint first):
        cdef double log_e
        self._check(y)
        with nogil:
            _niw_logpdf(y, self.kappa, self.nu, self.mu, self.psi, self._log_pi)
            log_e = _bocpd(self._log_pi[0], self._cur, self.log_h, self.log_1mh, first, self._nxt)
            if log_e != NEG_INF:
                _niw_update(y, self.kappa, self.nu, self.mu, self.psi,
                            self.kappa0, self.nu0, self.mu0, self.psi0)
        if log_e != NEG_INF:
            self._cur, self._nxt = self._nxt, self._cur
            self._arrays.reverse()
        return log_e

    def predict(self, const double[::1] y, bint first):
        cdef double log_e
        self._check(y)
        with nogil:
            _niw_logpdf(y, self.kappa, self.nu, self.mu, self.psi, self._log_pi)
            log_e = _bocpd(self._log_pi[0], self._cur, self.log_h, self.log_1mh, first, self._scratch)
        return log_e
