"""The timing harness: synthetic problem generation and report structure."""

import numpy as np
import pytest

from topoloc.bench import make_synthetic_problem, run_benchmark


def test_synthetic_problem_shapes_and_determinism():
    m1, steps1, q1 = make_synthetic_problem(200, 16, window=4, seed=9, n_inputs=3)
    m2, steps2, q2 = make_synthetic_problem(200, 16, window=4, seed=9, n_inputs=3)
    assert m1.n_nodes == 200
    assert m1.window == 4
    assert m1.descriptor_dim == 16
    assert q1.shape == (3, 16) and q1.dtype == np.float32
    assert len(steps1) == 3
    np.testing.assert_array_equal(m1.descriptors, m2.descriptors)
    np.testing.assert_array_equal(q1, q2)
    for a, b in zip(steps1, steps2):
        assert a.mean.as_array().tolist() == b.mean.as_array().tolist()

    m3, _, q3 = make_synthetic_problem(200, 16, window=4, seed=10, n_inputs=3)
    assert not np.array_equal(q1, q3)


def test_synthetic_problem_descriptors_unit_norm():
    m, _, queries = make_synthetic_problem(64, 8, n_inputs=5)
    norms = np.linalg.norm(m.descriptors_f64, axis=1)
    np.testing.assert_allclose(norms, 1.0, atol=1e-6)
    np.testing.assert_allclose(np.linalg.norm(queries, axis=1), 1.0, atol=1e-6)


def test_synthetic_problem_validation():
    with pytest.raises(ValueError):
        make_synthetic_problem(3, 8, window=5)
    with pytest.raises(ValueError):
        make_synthetic_problem(100, 0)
    with pytest.raises(ValueError):
        run_benchmark(repeats=0)


def test_benchmark_report_structure():
    report = run_benchmark(n_nodes=300, dim=16, repeats=5, seed=1)
    assert report["n_nodes"] == 300
    assert report["repeats"] == 5
    assert set(report["stages"]) == {"motion", "measurement", "forward", "backward"}
    for stage in report["stages"].values():
        assert 0.0 < stage["mean_ms"] <= stage["max_ms"]
    total = sum(s["mean_ms"] for s in report["stages"].values())
    assert report["total_mean_ms"] == pytest.approx(total)
    assert report["backward_over_forward"] > 0.0
