"""Per-stage timing of the inference hot path on a synthetic problem.

The benchmark times the four per-step stages in isolation: building the
transition model from an odometry step, evaluating the measurement
likelihood, one forward update, and one backward smoothing update.  The map
is a straight line at fixed spacing so problem size is controlled exactly.
"""

from __future__ import annotations

import time

import numpy as np

from .geometry import Covariance3, OdometryStep, Pose2
from .mapping import TopometricMap
from .measurement import MeasurementParams, likelihood_vector
from .motion import MotionParams, build_transition_model
from .filtering import forward_step, init_belief

__all__ = ["make_synthetic_problem", "run_benchmark"]

_STREAM_BENCH = 3


def make_synthetic_problem(
    n_nodes: int, dim: int, window: int = 5, seed: int = 0, n_inputs: int = 1
):
    """A straight-line map plus ``n_inputs`` odometry steps and query descriptors.

    Returns ``(map_, steps, queries)`` where ``steps`` is a list of
    :class:`OdometryStep` and ``queries`` a float32 array of shape
    ``(n_inputs, dim)``.
    """
    if n_nodes < window or dim < 1 or n_inputs < 1:
        raise ValueError("need n_nodes >= window, dim >= 1, n_inputs >= 1")
    rng = np.random.default_rng([int(seed), _STREAM_BENCH])
    spacing = 2.0

    descriptors = rng.standard_normal((n_nodes, dim))
    descriptors /= np.linalg.norm(descriptors, axis=1, keepdims=True)
    descriptors = descriptors.astype(np.float32)

    band = np.full((n_nodes, window, 3), np.nan)
    for k in range(window):
        valid_rows = n_nodes - k
        band[:valid_rows, k, 0] = spacing * k
        band[:valid_rows, k, 1] = 0.0
        band[:valid_rows, k, 2] = 0.0
    map_ = TopometricMap(descriptors, band, node_spacing=spacing)

    cov = Covariance3.from_diagonal(0.05**2, 0.05**2, 0.02**2)
    steps = []
    for _ in range(n_inputs):
        jitter = rng.normal(scale=(0.05, 0.05, 0.01))
        steps.append(
            OdometryStep(
                mean=Pose2(spacing + jitter[0], jitter[1], jitter[2]), cov=cov
            )
        )

    nodes = rng.integers(0, n_nodes, size=n_inputs)
    noise = 0.1 * rng.standard_normal((n_inputs, dim))
    queries = map_.descriptors_f64[nodes] + noise
    queries /= np.linalg.norm(queries, axis=1, keepdims=True)
    return map_, steps, queries.astype(np.float32)


def run_benchmark(
    n_nodes: int = 3000,
    dim: int = 64,
    repeats: int = 50,
    seed: int = 0,
    window: int = 5,
) -> dict:
    """Time each per-step stage ``repeats`` times and summarize in milliseconds."""
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    map_, steps, queries = make_synthetic_problem(
        n_nodes, dim, window=window, seed=seed, n_inputs=repeats
    )
    motion_params = MotionParams()
    meas_params = MeasurementParams(lam=1.0)

    # warm up caches (segment table, BLAS) outside the timed region
    warm_model = build_transition_model(map_, steps[0], motion_params)
    warm_g = likelihood_vector(queries[0], map_, meas_params)
    alpha = init_belief(map_.n_nodes, 0.1).vector
    alpha, _ = forward_step(alpha, warm_model, warm_g)

    durations = {"motion": [], "measurement": [], "forward": [], "backward": []}
    for r in range(repeats):
        t0 = time.perf_counter()
        model = build_transition_model(map_, steps[r], motion_params)
        t1 = time.perf_counter()
        g = likelihood_vector(queries[r], map_, meas_params)
        t2 = time.perf_counter()
        alpha, c = forward_step(alpha, model, g)
        t3 = time.perf_counter()
        beta = np.ones_like(alpha)
        weighted = g * beta
        beta = model.backpropagate(weighted) / c
        t4 = time.perf_counter()
        durations["motion"].append(t1 - t0)
        durations["measurement"].append(t2 - t1)
        durations["forward"].append(t3 - t2)
        durations["backward"].append(t4 - t3)

    stages = {}
    for name, vals in durations.items():
        arr = 1e3 * np.array(vals)
        stages[name] = {
            "mean_ms": float(arr.mean()),
            "max_ms": float(arr.max()),
        }
    total_mean = sum(s["mean_ms"] for s in stages.values())
    return {
        "n_nodes": n_nodes,
        "dim": dim,
        "window": window,
        "repeats": repeats,
        "stages": stages,
        "total_mean_ms": total_mean,
        "backward_over_forward": stages["backward"]["mean_ms"]
        / stages["forward"]["mean_ms"],
    }
