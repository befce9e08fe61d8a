import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from bosd import kernels

py = kernels.get_backend("python")
try:
    cc = kernels.get_backend("compiled")
except ImportError:
    cc = None

needs_compiled = pytest.mark.skipif(cc is None, reason="compiled kernels not built")
seeds = st.integers(0, 2 ** 32 - 1)


def _log_gamma(rng, k, d_max, sparse=False):
    g = rng.normal(size=(k, d_max, d_max))
    g[:, np.triu_indices(d_max, 1)[0], np.triu_indices(d_max, 1)[1]] = -np.inf
    if sparse:
        g[rng.random(g.shape) < 0.3] = -np.inf
    return g


def _bosd_inputs(rng, k, d_max, shared):
    with np.errstate(divide="ignore"):
        log_a = np.log(rng.dirichlet(np.ones(k), size=k))
        log_dur = np.log(rng.dirichlet(np.ones(d_max), size=k))
        log_init = np.log(rng.dirichlet(np.ones(k)))
    shape = (k, d_max) if shared else (k, d_max, d_max)
    return _log_gamma(rng, k, d_max), rng.normal(size=shape), log_a, log_dur, log_init


def _run_bosd(backend, shared, args, first):
    log_gamma = args[0]
    k, d_max = log_gamma.shape[:2]
    out = np.empty_like(log_gamma)
    rl, res, st_ = np.empty(d_max), np.empty(d_max), np.empty(k)
    fn = backend.bosd_recursion_shared if shared else backend.bosd_recursion
    log_e = fn(*args, first, out, rl, res, st_)
    return log_e, out, rl, res, st_


def _niw_bank(rng, k, n, m):
    kappa = rng.uniform(0.5, 3, size=(k, n))
    nu = rng.uniform(m + 1, m + 6, size=(k, n))
    mu = rng.normal(size=(k, n, m))
    a = rng.normal(size=(k, n, m, m))
    psi = a @ np.swapaxes(a, -1, -2) + m * np.eye(m)
    return kappa, nu, mu, psi


class TestActiveBackend:
    def test_backend_name(self):
        assert kernels.BACKEND in ("compiled", "python")

    def test_unknown_backend(self):
        with pytest.raises(ValueError):
            kernels.get_backend("fortran")


class TestPythonKernels:
    def test_logsumexp_all_neg_inf(self):
        assert py.logsumexp(np.full(3, -np.inf)) == -np.inf

    def test_logsumexp_axis(self, rng):
        x = rng.normal(size=(3, 4))
        np.testing.assert_allclose(py.logsumexp(x, axis=1), np.log(np.exp(x).sum(axis=1)))

    def test_niw_logpdf_is_student_t(self, rng):
        kappa, nu, mu, psi = _niw_bank(rng, 1, 3, 2)
        y = rng.normal(size=2)
        out = np.empty((1, 3))
        py.niw_logpdf(y, kappa, nu, mu, psi, out)
        for r in range(3):
            dof = nu[0, r] - 1
            shape = psi[0, r] * (kappa[0, r] + 1) / (kappa[0, r] * dof)
            expected = stats.multivariate_t(mu[0, r], shape, df=dof).logpdf(y)
            assert out[0, r] == pytest.approx(expected, abs=1e-10)

    def test_bocpd_first_step(self):
        out = np.empty(3)
        log_e = py.bocpd_recursion(np.array([-1.0, 5.0, 5.0]), np.zeros(3), np.zeros(3),
                                   np.array([0.0, 0.0, -np.inf]), True, out)
        assert log_e == -1.0
        np.testing.assert_array_equal(out, [0.0, -np.inf, -np.inf])

    def test_bosd_zero_mass_returns_neg_inf(self, rng):
        args = list(_bosd_inputs(rng, 2, 3, False))
        args[1] = np.full_like(args[1], -np.inf)
        log_e, _, rl, res, st_ = _run_bosd(py, False, args, False)
        assert log_e == -np.inf
        assert rl.sum() == res.sum() == st_.sum() == 0.0


@needs_compiled
class TestBackendsAgree:
    @given(seeds, st.integers(1, 3), st.integers(1, 7), st.booleans(), st.booleans())
    def test_bosd_recursion(self, seed, k, d_max, shared, first):
        rng = np.random.default_rng(seed)
        args = _bosd_inputs(rng, k, d_max, shared)
        a = _run_bosd(py, shared, args, first)
        b = _run_bosd(cc, shared, args, first)
        assert a[0] == pytest.approx(b[0], abs=1e-12)
        for x, y in zip(a[1:], b[1:]):
            np.testing.assert_allclose(x, y, atol=1e-12, rtol=1e-12)

    @given(seeds, st.integers(1, 12), st.booleans())
    def test_bocpd_recursion(self, seed, n, first):
        rng = np.random.default_rng(seed)
        h = rng.uniform(size=n)
        h[-1] = 1.0
        with np.errstate(divide="ignore"):
            log_h, log_1mh = np.log(h), np.log1p(-h)
        log_pi, log_gamma = rng.normal(size=n), rng.normal(size=n)
        out_a, out_b = np.empty(n), np.empty(n)
        ea = py.bocpd_recursion(log_pi, log_gamma, log_h, log_1mh, first, out_a)
        eb = cc.bocpd_recursion(log_pi, log_gamma, log_h, log_1mh, first, out_b)
        assert ea == pytest.approx(eb, abs=1e-12)
        np.testing.assert_allclose(out_a, out_b, atol=1e-12)

    @given(seeds, st.integers(1, 3), st.integers(1, 6), st.integers(1, 3))
    def test_niw_logpdf_and_update(self, seed, k, n, m):
        rng = np.random.default_rng(seed)
        bank_a = _niw_bank(rng, k, n, m)
        bank_b = tuple(x.copy() for x in bank_a)
        prior = (rng.uniform(0.5, 2, size=k), rng.uniform(m + 1, m + 3, size=k), rng.normal(size=(k, m)),
                 np.broadcast_to(np.eye(m), (k, m, m)).copy())
        y = rng.normal(size=m)
        out_a, out_b = np.empty((k, n)), np.empty((k, n))
        py.niw_logpdf(y, *bank_a, out_a)
        cc.niw_logpdf(y, *bank_b, out_b)
        np.testing.assert_allclose(out_a, out_b, atol=1e-11)
        py.niw_update(y, *bank_a, *prior)
        cc.niw_update(y, *bank_b, *prior)
        for x, z in zip(bank_a, bank_b):
            np.testing.assert_allclose(x, z, atol=1e-12)

    @given(seeds, st.integers(2, 10))
    def test_niw_run_length_stepper(self, seed, n):
        rng = np.random.default_rng(seed)
        m = 2
        h = np.full(n, 0.2)
        h[-1] = 1.0
        with np.errstate(divide="ignore"):
            log_h, log_1mh = np.log(h), np.log1p(-h)
        prior = (np.array([1.0]), np.array([m + 2.0]), np.zeros((1, m)), np.eye(m)[None])
        steppers = []
        for backend in (py, cc):
            bank = (np.full((1, n), 1.0), np.full((1, n), m + 2.0), np.zeros((1, n, m)),
                    np.broadcast_to(np.eye(m), (1, n, m, m)).copy())
            steppers.append(backend.NiwRunLength(log_h, log_1mh, np.full(n, -np.inf), *bank, *prior))
        for t in range(12):
            y = rng.normal(size=m)
            pa, pb = (s.predict(y, t == 0) for s in steppers)
            ea, eb = (s.step(y, t == 0) for s in steppers)
            assert pa == ea and pb == eb
            assert ea == pytest.approx(eb, abs=1e-12)
            np.testing.assert_allclose(steppers[0].log_gamma, steppers[1].log_gamma, atol=1e-12)

    @pytest.mark.parametrize("backend", ["python", "compiled"])
    def test_stepper_rejects_bad_observation(self, backend):
        mod = kernels.get_backend(backend)
        n, m = 3, 2
        bank = (np.ones((1, n)), np.full((1, n), 4.0), np.zeros((1, n, m)),
                np.broadcast_to(np.eye(m), (1, n, m, m)).copy())
        prior = (np.ones(1), np.full(1, 4.0), np.zeros((1, m)), np.eye(m)[None])
        log_h = np.log(np.array([0.5, 0.5, 1.0]))
        log_1mh = np.array([np.log(0.5), np.log(0.5), -np.inf])
        s = mod.NiwRunLength(log_h, log_1mh, np.full(n, -np.inf), *bank, *prior)
        with pytest.raises(ValueError, match="dimension"):
            s.step(np.zeros(3), True)
        with pytest.raises(ValueError, match="non-finite"):
            s.step(np.array([np.nan, 0.0]), True)
