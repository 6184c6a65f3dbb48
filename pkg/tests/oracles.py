"""Brute-force reference implementations the unit tests check against.

Everything here trades efficiency for obviousness: posteriors by explicit
path enumeration, segment minima by dense grid search, the chi-square CDF by
numerical quadrature.  None of it imports from the package internals beyond
plain arrays, so a bug in the library cannot hide in its own oracle.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad


def enumerate_marginals(prior, transitions, likelihoods):
    """Filtered and smoothed marginals plus evidence, by path enumeration.

    Parameters
    ----------
    prior : (S,) array
        Initial state distribution.
    transitions : list of (S, S) arrays
        Dense transition matrix per step, length T.
    likelihoods : list of (S,) arrays
        Observation likelihood per time, length T + 1.

    Returns
    -------
    filtered : (T+1, S) array
    smoothed : (T+1, S) array
    evidence : float
    """
    prior = np.asarray(prior, dtype=float)
    s = prior.size
    t_steps = len(transitions)
    assert len(likelihoods) == t_steps + 1

    def joint_over_paths(upto):
        # weight of every state sequence of length upto+1, indexed by the
        # cartesian grid of states per time
        paths = np.indices((s,) * (upto + 1)).reshape(upto + 1, -1)
        w = prior[paths[0]] * likelihoods[0][paths[0]]
        for t in range(1, upto + 1):
            w = w * transitions[t - 1][paths[t - 1], paths[t]]
            w = w * likelihoods[t][paths[t]]
        return paths, w

    filtered = np.zeros((t_steps + 1, s))
    for t in range(t_steps + 1):
        paths, w = joint_over_paths(t)
        marg = np.bincount(paths[t], weights=w, minlength=s)
        filtered[t] = marg / marg.sum()

    paths, w = joint_over_paths(t_steps)
    evidence = float(w.sum())
    smoothed = np.zeros((t_steps + 1, s))
    for t in range(t_steps + 1):
        marg = np.bincount(paths[t], weights=w, minlength=s)
        smoothed[t] = marg / marg.sum()
    return filtered, smoothed, evidence


def random_banded_model(rng, n, t_steps, window=3):
    """A random banded-plus-off-state HMM in dense matrix form.

    Mirrors the structure the filter consumes: state n is off-map, rows of
    the within block only reach forward up to ``window - 1`` nodes, the off
    row is a self-loop plus uniform re-entry.  Returns (prior, transitions,
    likelihoods) with dense (n+1, n+1) matrices.
    """
    s = n + 1
    p0_off = rng.uniform(0.0, 0.5)
    prior = np.full(s, (1.0 - p0_off) / n)
    prior[n] = p0_off

    transitions = []
    for _ in range(t_steps):
        m = np.zeros((s, s))
        for i in range(n):
            to_off = rng.uniform(0.0, 0.6)
            js = list(range(i + 1, min(i + window, n))) or [i]
            raw = rng.uniform(0.1, 1.0, size=len(js))
            raw = raw / raw.sum() * (1.0 - to_off)
            for j, p in zip(js, raw):
                m[i, j] = p
            m[i, n] = to_off
        off_self = rng.uniform(0.2, 0.95)
        m[n, :n] = (1.0 - off_self) / n
        m[n, n] = off_self
        transitions.append(m)

    likelihoods = [rng.uniform(0.05, 1.0, size=s) for _ in range(t_steps + 1)]
    return prior, transitions, likelihoods


def grid_min_mahalanobis(lo, hi, mean, cov_inv, n_grid=10_000):
    """Dense grid search for the segment minimum the closed form must match."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    ss = np.linspace(0.0, 1.0, n_grid)
    pts = lo[None, :] + ss[:, None] * (hi - lo)[None, :]
    r = pts - np.asarray(mean, dtype=float)[None, :]
    d2 = np.einsum("ni,ij,nj->n", r, cov_inv, r)
    k = int(np.argmin(d2))
    return float(d2[k]), float(ss[k])


def chi2_cdf_3_quad(x):
    """CDF of the chi-square distribution with 3 dof via quadrature."""
    if x <= 0.0:
        return 0.0
    density = lambda u: np.sqrt(u) * np.exp(-u / 2.0) / np.sqrt(2.0 * np.pi)
    val, _ = quad(density, 0.0, x, limit=200)
    return float(val)
