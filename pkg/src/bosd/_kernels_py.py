"""Pure numpy implementation of the hot kernels.

Same signatures and semantics as the compiled ``_core`` extension; used when
the extension is not built or when ``BOSD_PURE_PYTHON=1``.  All kernels write
into caller-provided buffers and return the step log evidence, or ``-inf``
(leaving ``out`` unnormalized and marginals zeroed) when every hypothesis has
zero probability.
"""
import numpy as np
from scipy.special import gammaln

NEG_INF = -np.inf


def logsumexp(x, axis=None):
    """Max-shifted log-sum-exp; all ``-inf`` input gives ``-inf``.

    Lighter than ``scipy.special.logsumexp`` for the small arrays of one step.
    """
    x = np.asarray(x)
    mx = np.max(x, axis=axis, keepdims=True)
    safe = np.where(np.isfinite(mx), mx, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(x - safe), axis=axis, keepdims=True)) + safe
    return out.item() if axis is None else np.squeeze(out, axis=axis)


def bocpd_recursion(log_pi, log_gamma, log_h, log_1mh, first, out):
    """One run-length recursion step.

    ``log_h[R]`` must be 0 and ``log_1mh[R]`` must be ``-inf`` (forced change
    point at the cap).  With ``first`` set the step opens a segment at r = 0.
    """
    out.fill(NEG_INF)
    if first:
        out[0] = log_pi[0]
    else:
        out[1:] = log_1mh[:-1] + log_pi[1:] + log_gamma[:-1]
        out[0] = log_pi[0] + logsumexp(log_h + log_gamma)
    log_e = logsumexp(out)
    if not np.isfinite(log_e):
        return NEG_INF
    out -= log_e
    return float(log_e)


def _change_point_input(log_gamma, log_a, log_init, first):
    if first:
        return np.asarray(log_init, dtype=float)
    d_max = log_gamma.shape[1]
    idx = np.arange(d_max)
    # mass of segments completing at t-1: r = d - 1
    eta = logsumexp(log_gamma[:, idx, idx], axis=1)
    return logsumexp(eta[:, None] + np.asarray(log_a), axis=0)


def _finish(out, rl, res, st, valid, l_index):
    log_e = logsumexp(out)
    rl.fill(0.0)
    res.fill(0.0)
    st.fill(0.0)
    if not np.isfinite(log_e):
        return NEG_INF
    out -= log_e
    p = np.exp(out)
    p[:, ~valid] = 0.0
    rl[:] = p.sum(axis=(0, 1))
    st[:] = p.sum(axis=(1, 2))
    res[:] = np.bincount(l_index[valid], weights=p.sum(axis=0)[valid], minlength=res.shape[0])
    return float(log_e)


_grids = {}


def _grid(d_max):
    if d_max not in _grids:
        d_idx, r = np.meshgrid(np.arange(d_max), np.arange(d_max), indexing="ij")
        _grids[d_max] = (r <= d_idx, d_idx - r)
    return _grids[d_max]


def bosd_recursion(log_gamma, log_pi, log_a, log_dur, log_init, first, out, rl, res, st):
    """Joint (z, d, r) step; ``log_pi`` has shape (K, D_max, D_max) indexed [z, d-1, r]."""
    valid, l_index = _grid(log_gamma.shape[1])
    beta = _change_point_input(log_gamma, log_a, log_init, first)
    out.fill(NEG_INF)
    if not first:
        out[:, :, 1:] = log_gamma[:, :, :-1] + log_pi[:, :, 1:]
    out[:, :, 0] = np.asarray(log_dur) + log_pi[:, :, 0] + beta[:, None]
    out[:, ~valid] = NEG_INF
    return _finish(out, rl, res, st, valid, l_index)


def bosd_recursion_shared(log_gamma, log_pi, log_a, log_dur, log_init, first, out, rl, res, st):
    """As :func:`bosd_recursion` for duration-agnostic models; ``log_pi`` is (K, D_max) over [z, r]."""
    return bosd_recursion(
        log_gamma, np.broadcast_to(log_pi[:, None, :], log_gamma.shape),
        log_a, log_dur, log_init, first, out, rl, res, st)


def niw_logpdf(y, kappa, nu, mu, psi, out):
    """Multivariate Student-t predictive of a normal-inverse-Wishart bank.

    Arrays are indexed [z, r]: ``kappa``/``nu`` (K, n), ``mu`` (K, n, M),
    ``psi`` (K, n, M, M); ``out`` is (K, n).
    """
    m = y.shape[0]
    dof = nu - m + 1.0
    scale = (kappa + 1.0) / (kappa * dof)
    chol = np.linalg.cholesky(psi)
    diff = (y - mu)[..., None]
    sol = np.linalg.solve(chol, diff)[..., 0]
    maha = np.sum(sol * sol, axis=-1) / scale
    half_logdet = np.sum(np.log(np.diagonal(chol, axis1=-2, axis2=-1)), axis=-1) + 0.5 * m * np.log(scale)
    out[...] = (gammaln(0.5 * (dof + m)) - gammaln(0.5 * dof) - 0.5 * m * np.log(dof * np.pi)
                - half_logdet - 0.5 * (dof + m) * np.log1p(maha / dof))


def niw_update(y, kappa, nu, mu, psi, kappa0, nu0, mu0, psi0):
    """Shift every bank one run length up while absorbing ``y``; slot 0 gets the prior."""
    k_prev, nu_prev, mu_prev, psi_prev = kappa[:, :-1], nu[:, :-1], mu[:, :-1], psi[:, :-1]
    diff = y - mu_prev
    ratio = (k_prev / (k_prev + 1.0))[..., None, None]
    new_psi = psi_prev + ratio * diff[..., :, None] * diff[..., None, :]
    new_mu = (k_prev[..., None] * mu_prev + y) / (k_prev[..., None] + 1.0)
    psi[:, 1:] = new_psi
    mu[:, 1:] = new_mu
    nu[:, 1:] = nu_prev + 1.0
    kappa[:, 1:] = k_prev + 1.0
    kappa[:, 0] = kappa0
    nu[:, 0] = nu0
    mu[:, 0] = mu0
    psi[:, 0] = psi0


class NiwRunLength:
    """Run-length filter state with a single-state conjugate Gaussian bank.

    Holds the posterior buffers and the bank arrays (shared, not copied) so a
    step costs one call.  ``step`` leaves everything untouched and returns
    ``-inf`` when the mass underflows.
    """

    def __init__(self, log_h, log_1mh, log_gamma, kappa, nu, mu, psi, kappa0, nu0, mu0, psi0):
        self.log_h, self.log_1mh = log_h, log_1mh
        self._bank = (kappa, nu, mu, psi)
        self._prior = (kappa0, nu0, mu0, psi0)
        self.log_gamma = np.array(log_gamma, dtype=float)
        self._nxt = np.empty_like(self.log_gamma)
        self._log_pi = np.empty((1, self.log_gamma.size))
        self.m = mu.shape[2]

    def _check(self, y):
        if y.shape[0] != self.m:
            raise ValueError(f"observation has dimension {y.shape[0]}, expected {self.m}")
        if not np.all(np.isfinite(y)):
            raise ValueError("observation has non-finite entries")

    def _advance(self, y, first, out):
        self._check(y)
        niw_logpdf(y, *self._bank, self._log_pi)
        return bocpd_recursion(self._log_pi[0], self.log_gamma, self.log_h, self.log_1mh, first, out)

    def step(self, y, first):
        log_e = self._advance(y, first, self._nxt)
        if log_e != NEG_INF:
            niw_update(y, *self._bank, *self._prior)
            self.log_gamma, self._nxt = self._nxt, self.log_gamma
        return log_e

    def predict(self, y, first):
        return self._advance(y, first, np.empty_like(self.log_gamma))
