"""Bracketed bisection for monotone scalar functions."""

from __future__ import annotations

import numpy as np

from .errors import NoConvergence


def bisect(f, lo, hi, *, xtol=0.0, ftol=0.0, max_iter=200):
    """Find a sign change of ``f`` on ``[lo, hi]``.

    Stops when ``|f(mid)| <= ftol``, when the bracket is narrower than ``xtol``,
    or when the midpoint can no longer be represented between the endpoints.
    Returns ``(x, f(x))``.
    """
    flo = f(lo)
    fhi = f(hi)
    if flo == 0:
        return lo, flo
    if fhi == 0:
        return hi, fhi
    if np.sign(flo) == np.sign(fhi):
        raise NoConvergence(f"no sign change on [{lo!r}, {hi!r}]: f={flo!r}, {fhi!r}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if abs(fmid) <= ftol or mid <= lo or mid >= hi or hi - lo <= xtol:
            return mid, fmid
        if np.sign(fmid) == np.sign(flo):
            lo, flo = mid, fmid
        else:
            hi, fhi = mid, fmid
    mid = 0.5 * (lo + hi)
    fmid = f(mid)
    if abs(fmid) <= ftol or hi - lo <= xtol:
        return mid, fmid
    raise NoConvergence(f"bisection exhausted {max_iter} iterations on [{lo!r}, {hi!r}]", abs(fmid))


def bisect_decreasing(f, target, lo, hi, n_iter=100):
    """Vectorised bisection for ``f(z) = target`` with ``f`` strictly decreasing.

    ``target``, ``lo`` and ``hi`` broadcast against each other; the bracket must
    satisfy ``f(lo) >= target >= f(hi)`` elementwise.
    """
    target = np.asarray(target, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), target.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), target.shape).copy()
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        if np.all((mid == lo) | (mid == hi)):
            break
        above = f(mid) > target
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return 0.5 * (lo + hi)
