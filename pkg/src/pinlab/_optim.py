"""Unimodal scalar search used by the variational formulas."""

import math

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_max(f, lo, hi, tol=1e-10):
    """Maximize a unimodal ``f`` on ``[lo, hi]``.

    The interior golden-section result is compared with both endpoints, so
    a maximum sitting on the boundary is returned exactly.

    Returns
    -------
    (x, f(x))
    """
    flo, fhi = f(lo), f(hi)
    if hi - lo <= tol:
        return (lo, flo) if flo >= fhi else (hi, fhi)
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    best = (c, fc) if fc >= fd else (d, fd)
    for cand in ((lo, flo), (hi, fhi)):
        if cand[1] > best[1]:
            best = cand
    return best


def golden_min(f, lo, hi, tol=1e-10):
    x, v = golden_max(lambda t: -f(t), lo, hi, tol)
    return x, -v
