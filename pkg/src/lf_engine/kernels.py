"""Closed-form integrals of monomials against a complex exponential.

``normalized_monomial_integrals(t, kmax)`` returns

    J_k(t) = integral_0^1 u^k exp(t u) du,   k = 0..kmax

and ``monomial_exp_integral(k, theta, L) = L**(k+1) * J_k(theta * L)``.

Evaluation stays accurate to a few ulp for every complex ``t``:

* ``|t| < eps``: the Taylor series sum_n t^n / (n! (k+n+1)) for all k;
* otherwise the recurrence ``k J_{k-1} + t J_k = exp(t)`` is run in its
  stable direction.  Upward from ``J_0 = (exp(t) - 1)/t`` while ``k <= |t|``
  (errors shrink by ``k/|t|`` per step), and downward from ``J_kmax`` for the
  rest, where ``J_kmax`` comes from the confluent series
  ``exp(t) sum_n (-t)^n kmax!/(kmax+n+1)!`` (errors shrink by ``|t|/k``).

For ``|t| >= kmax + 1`` this is exactly the antiderivative formula
``exp(t)/t^(k+1) sum_m (-1)^m k!/(k-m)! t^(k-m) - (-1)^k k!/t^(k+1)``
evaluated by Horner's rule; that formula applied literally at small ``|t|``
cancels catastrophically, which is what the downward branch avoids.
"""
from __future__ import annotations


import numpy as np

DEFAULT_EPS = 1e-3
DEFAULT_TERMS = 24


def _top_series(t, kmax: int):
    """J_kmax(t) for |t| < kmax + 1 via the confluent series."""
    term = np.full(t.shape, 1.0 / (kmax + 1), dtype=complex)
    acc = term.copy()
    for n in range(1000):
        term = term * (-t) / (kmax + n + 2)
        acc += term
        if np.all(np.abs(term) <= 1e-18 * np.abs(acc)):
            break
    return np.exp(t) * acc


def normalized_monomial_integrals(t, kmax: int, eps: float = DEFAULT_EPS,
                                  series_terms: int = DEFAULT_TERMS) -> np.ndarray:
    """J_0..J_kmax at every ``t``; result shape is ``np.shape(t) + (kmax + 1,)``."""
    if kmax < 0:
        raise ValueError("kmax must be non-negative")
    t = np.asarray(t, dtype=complex)
    shape = t.shape
    tt = t.reshape(-1)
    k = np.arange(kmax + 1)
    out = np.empty((tt.size, kmax + 1), dtype=complex)
    mag = np.abs(tt)

    small = mag < eps
    if np.any(small):
        ts = tt[small][:, None]
        acc = np.zeros((ts.shape[0], kmax + 1), dtype=complex)
        power = np.ones_like(ts)
        for n in range(series_terms):
            acc += power / (k + n + 1)
            power = power * ts / (n + 1)
        out[small] = acc

    rows = np.flatnonzero(~small)
    if rows.size:
        ts = tt[rows]
        et = np.exp(ts)
        # last index reached by the upward pass (-1: none)
        m = np.minimum(np.floor(mag[rows]), kmax).astype(int) if kmax > 0 else np.zeros(rows.size, int)
        m = np.where(mag[rows] >= 1.0, m, -1)
        block = np.empty((rows.size, kmax + 1), dtype=complex)
        up = np.flatnonzero(m >= 0)
        if up.size:
            tu, eu = ts[up], et[up]
            prev = (eu - 1.0) / tu
            block[up, 0] = prev
            for kk in range(1, kmax + 1):
                sel = m[up] >= kk
                if not np.any(sel):
                    break
                prev = (eu - kk * prev) / tu
                block[up[sel], kk] = prev[sel]
        down = np.flatnonzero(m < kmax)
        if down.size:
            td, ed = ts[down], et[down]
            cur = _top_series(td, kmax)
            block[down, kmax] = cur
            md = m[down]
            for kk in range(kmax, 0, -1):
                sel = md < kk - 1
                if not np.any(sel):
                    break
                cur = (ed - td * cur) / kk
                block[down[sel], kk - 1] = cur[sel]
        out[rows] = block

    return out.reshape(shape + (kmax + 1,))


def monomial_exp_integral(k: int, theta, L: float, eps: float = DEFAULT_EPS,
                          series_terms: int = DEFAULT_TERMS):
    """integral_0^L z^k exp(theta z) dz for complex ``theta`` (scalar or array)."""
    if k < 0:
        raise ValueError("k must be non-negative")
    if not L > 0:
        raise ValueError("L must be positive")
    J = normalized_monomial_integrals(np.asarray(theta) * L, k, eps, series_terms)[..., k]
    out = L ** (k + 1) * J
    return complex(out) if out.ndim == 0 else out
