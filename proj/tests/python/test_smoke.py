import math

import numpy as np
import pytest

import biggp


def exp_cov(a, b, sigma2, rho):
    return sigma2 * np.exp(-np.abs(a[:, None] - b[None, :]) / rho)


@pytest.fixture
def problem_data():
    rng = np.random.default_rng(4)
    x = np.sort(rng.uniform(0, 10, 40))
    xs = np.array([0.5, 3.3, 8.1])
    c = exp_cov(x, x, 1.2, 1.5) + 0.1 * np.eye(40)
    y = np.linalg.cholesky(c) @ rng.standard_normal(40)
    return x, xs, y, c


def test_cluster_roundtrip_and_cholesky():
    cl = biggp.Cluster(workers=3)
    assert cl.size == 3 and cl.grid_order == 2
    rng = np.random.default_rng(1)
    b = rng.standard_normal((17, 17))
    a = b @ b.T + 17 * np.eye(17)
    cl.distribute("A", a, h=2)
    np.testing.assert_array_equal(cl.collect("A"), np.tril(a))
    cl.cholesky("A", "L")
    l = cl.collect("L")
    np.testing.assert_allclose(l, np.linalg.cholesky(a), rtol=0, atol=1e-12)
    assert cl.log_det("L") == pytest.approx(np.linalg.slogdet(a)[1], rel=1e-12)
    peaks = cl.kernel_peaks()
    assert len(peaks) == 3 and all(peak <= owned + 4 for owned, peak in peaks)

    v = rng.standard_normal(17)
    cl.distribute("v", v.reshape(-1, 1), kind="vector", h=2)
    cl.solve("L", "v", "f")
    np.testing.assert_allclose(cl.collect("f").ravel(), np.linalg.solve(l, v), atol=1e-12)
    cl.shutdown()
    assert not cl.running


def test_errors_carry_kind_and_rank():
    with pytest.raises(biggp.Error) as info:
        biggp.Cluster(workers=7)
    assert info.value.kind == "NotTriangularNumber"

    cl = biggp.Cluster(workers=3)
    cl.distribute("N", -np.eye(6), h=1)
    with pytest.raises(biggp.Error) as info:
        cl.cholesky("N", "L")
    assert info.value.kind == "NotPositiveDefinite"
    assert info.value.detail == 1
    assert info.value.rank == 1


def test_log_density_matches_numpy(problem_data):
    x, xs, y, c = problem_data
    cl = biggp.Cluster(workers=6)
    p = biggp.KrigeProblem(cl, "p", "matern", x.reshape(-1, 1), y, xs.reshape(-1, 1), theta=[1.2, 1.5, 0.1])
    sign, logdet = np.linalg.slogdet(c)
    want = -0.5 * (40 * math.log(2 * math.pi) + logdet + y @ np.linalg.solve(c, y))
    assert p.log_density() == pytest.approx(want, rel=1e-10)
    assert p.log_density([1.0, 1.0, 0.2]) != pytest.approx(want)
    assert p.theta == [1.0, 1.0, 0.2]


def test_predict_matches_numpy(problem_data):
    x, xs, y, c = problem_data
    cl = biggp.Cluster(workers=3)
    p = biggp.KrigeProblem(cl, "p", "matern", x.reshape(-1, 1), y, xs.reshape(-1, 1), theta=[1.2, 1.5, 0.1])
    mean, se = p.predict()
    cs = exp_cov(x, xs, 1.2, 1.5)
    k = np.linalg.solve(c, cs)
    np.testing.assert_allclose(mean, cs.T @ np.linalg.solve(c, y), atol=1e-10)
    var = exp_cov(xs, xs, 1.2, 1.5) - cs.T @ k
    np.testing.assert_allclose(se, np.sqrt(np.diag(var)), atol=1e-10)
    np.testing.assert_allclose(p.prediction_variance(), var, atol=1e-10)


def test_fit_white_noise_closed_form():
    rng = np.random.default_rng(9)
    y = 2.0 * rng.standard_normal(50)
    cl = biggp.Cluster(workers=1)
    p = biggp.KrigeProblem(cl, "w", "white", np.arange(50.0).reshape(-1, 1), y, theta=[1.0])
    r = p.fit(tolerance=1e-12)
    assert r["converged"]
    assert r["theta"][0] == pytest.approx(np.mean(y**2), rel=1e-4)


def test_simulation_is_reproducible(problem_data):
    x, xs, y, _ = problem_data

    def draws():
        cl = biggp.Cluster(workers=3, seed=5)
        p = biggp.KrigeProblem(cl, "s", "matern", x.reshape(-1, 1), y, xs.reshape(-1, 1), theta=[1.2, 1.5, 0.1])
        return p.simulate(4, post=True)

    a, b = draws(), draws()
    assert a.shape == (3, 4)
    np.testing.assert_array_equal(a, b)


def test_socket_backend():
    exe = biggp.worker_executable()
    if not exe:
        pytest.skip("no worker executable")
    cl = biggp.Cluster(workers=3, backend="socket", worker_exe=exe)
    cl.distribute("I", np.eye(5), h=1)
    cl.cholesky("I", "L")
    np.testing.assert_array_equal(cl.collect("L"), np.eye(5))


def test_matern_helpers():
    assert biggp.matern_correlation(0.0, 1.0, 1.5) == 1.0
    assert biggp.matern_correlation(2.0, 2.0, 0.5) == pytest.approx(math.exp(-1))
    assert biggp.kernel_parameter_names("matern") == ["sigma2", "rho", "tau2"]
    assert "white" in biggp.builtin_kernels()
