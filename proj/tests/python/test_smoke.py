import math

import numpy as np
import pytest

import asyncdd


def test_problem_matches_its_matrix():
    p = asyncdd.poisson_problem(16)
    assert p.size == 15 * 15
    indptr, indices, data = p.csr()
    assert len(indptr) == p.size + 1
    assert len(data) == p.nnz
    x = np.random.default_rng(0).standard_normal(p.size)
    dense = np.zeros((p.size, p.size))
    for i in range(p.size):
        dense[i, indices[indptr[i]:indptr[i + 1]]] = data[indptr[i]:indptr[i + 1]]
    assert np.allclose(dense, dense.T)
    assert np.allclose(p.matvec(x), dense @ x)


def test_direct_solution_is_second_order():
    errs = []
    for n in (16, 32):
        p = asyncdd.poisson_problem(n)
        errs.append(p.nodal_error(p.direct_solve())[1])
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_partition_covers_every_unknown_once():
    parts = asyncdd.partition({"n": 32, "P": 4, "depth": 2})
    assert len(parts) == 4
    owned = np.concatenate([s["owned"] for s in parts])
    assert sorted(owned.tolist()) == list(range(31 * 31))
    for s in parts:
        assert set(s["base"]).issubset(set(s["overlap"]))


@pytest.mark.parametrize("solver", ["ras", "js", "ras2"])
def test_sync_solve_converges(solver):
    res = asyncdd.solve({"n": 32, "P": 4, "solver": solver, "tol": 1e-8})
    assert res["converged"]
    assert res["true_norm"] <= 1e-8 * 1.0001
    assert res["async_degree"] == 1.0
    p = asyncdd.poisson_problem(32)
    assert np.linalg.norm(p.f - p.matvec(res["u"])) == pytest.approx(res["true_norm"], rel=1e-6)


def test_round_robin_matches_sync():
    base = {"n": 16, "P": 4, "solver": "ras", "tol": 1e-10}
    sync = asyncdd.solve(base)
    rr = asyncdd.solve(dict(base, mode="async", schedule="round-robin"))
    assert np.array_equal(sync["u"], rr["u"])


def test_run_record():
    rec = asyncdd.run({"n": 32, "P": 4, "solver": "ras2", "mode": "async", "tol": 1e-8})
    assert rec["converged"]
    assert rec["coarse_size"] > 0
    assert rec["tau_sync_s"] > 0
    sync = asyncdd.run({"n": 32, "P": 4, "tol": 1e-8})
    assert sync["rho_hat"] == pytest.approx(sync["rho_tilde"], rel=1e-12)


def test_metrics():
    assert asyncdd.rho_tilde(1.0, 1e-8, 8) == pytest.approx(0.1)
    assert asyncdd.rho_hat(1.0, 1e-8, 8.0, 1.0) == pytest.approx(0.1)
    assert asyncdd.async_degree([10, 10, 10]) == 1.0
    assert asyncdd.async_degree([5, 10]) == 0.5
    assert asyncdd.stress_generations(10000)[1] == 0


def test_bad_config_raises():
    with pytest.raises(ValueError):
        asyncdd.run({"depth": 0})
    with pytest.raises(ValueError):
        asyncdd.solve({"bogus": 1})


def test_verify_suite():
    ok, text = asyncdd.verify("fem")
    assert ok
    assert "PASS" in text
    assert math.isfinite(asyncdd.default_config()["tol"])
