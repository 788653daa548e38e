"""Piecewise constant coefficient fields."""

import numpy as np


def _uniform(seed, i):
    # one independent counter-based stream per (seed, subdomain)
    key = np.array([int(seed) & 0xFFFFFFFFFFFFFFFF, int(i)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key)).random()


def sample_rho(partition, mode="one", rho_range=(1.0, 1e3), seed=0):
    """Per-subdomain coefficients.

    ``mode="one"`` gives all ones. ``mode="disc"`` (or ``"discontinuous"``)
    draws ``exp(U[ln rho_min, ln rho_max])`` independently per subdomain. The
    value of subdomain ``i`` depends only on ``(seed, i)``.
    """
    n = partition.n_subdomains if hasattr(partition, "n_subdomains") else int(partition)
    lo, hi = float(rho_range[0]), float(rho_range[1])
    if not (lo > 0 and hi >= lo):
        raise ValueError(f"invalid coefficient range [{lo}, {hi}]")
    if mode == "one":
        return np.ones(n)
    if mode not in ("disc", "discontinuous"):
        raise ValueError(f"unknown coefficient mode {mode!r}")
    a, b = np.log(lo), np.log(hi)
    u = np.array([_uniform(seed, i) for i in range(n)])
    return np.clip(np.exp(a + (b - a) * u), lo, hi)
