"""Finite-difference helpers shared by the gradient-check tests."""

import numpy as np

H = 1e-3


def rel_err(a: float, f: float) -> float:
    return abs(a - f) / max(abs(a) + abs(f), 1e-6)


def fd_partial(fn, x: np.ndarray, idx, h: float = H) -> float:
    """Central difference of scalar fn at coordinate idx of x (f64)."""
    xp = x.copy()
    xp[idx] += h
    xm = x.copy()
    xm[idx] -= h
    return (fn(xp) - fn(xm)) / (2.0 * h)


def check_grad_full(fn, x: np.ndarray, analytic: np.ndarray, tol: float = 1e-4,
                    h: float = H):
    """Compare analytic grad against FD at every coordinate of x."""
    worst = 0.0
    for idx in np.ndindex(x.shape):
        worst = max(worst, rel_err(analytic[idx], fd_partial(fn, x, idx, h)))
    assert worst <= tol, f"max relative error {worst:.3e} > {tol}"
    return worst


def check_grad_sampled(fn, x: np.ndarray, analytic: np.ndarray, rng, n: int = 20,
                       tol: float = 1e-4, h: float = H):
    """Compare analytic grad against FD on n seeded coordinates of x."""
    flat_count = x.size
    picks = rng.choice(flat_count, size=min(n, flat_count), replace=False)
    worst = 0.0
    for flat in picks:
        idx = np.unravel_index(int(flat), x.shape)
        worst = max(worst, rel_err(analytic[idx], fd_partial(fn, x, idx, h)))
    assert worst <= tol, f"max relative error {worst:.3e} > {tol}"
    return worst
