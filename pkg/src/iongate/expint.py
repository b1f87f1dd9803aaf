"""Closed-form integrals of complex exponentials over [0, 1].

``phi1(z) = (e^z - 1)/z`` and ``tri(p, q) = int_0^1 du int_0^u dv e^{p u + q v}``,
the exponential divided difference on the nodes {0, p, p+q}.  Both are
evaluated without catastrophic cancellation for any complex arguments of
moderate real part.
"""
from __future__ import annotations

import numpy as np

_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def phi1(z):
    z = np.asarray(z, dtype=complex)
    out = np.ones_like(z)
    nz = z != 0
    out[nz] = np.expm1(z[nz]) / z[nz]
    return out


def tri(p, q):
    """int_0^1 du e^{p u} int_0^u dv e^{q v}, vectorized over broadcast p, q."""
    p, q = np.broadcast_arrays(np.asarray(p, dtype=complex), np.asarray(q, dtype=complex))
    s = p + q
    out = np.empty(p.shape, dtype=complex)
    abs_s, abs_q = np.abs(s), np.abs(q)
    far = np.maximum(abs_s, abs_q) >= 0.5
    by_s = far & (abs_s >= abs_q)
    by_q = far & ~(abs_s >= abs_q)
    if by_s.any():
        ps, qs = p[by_s], q[by_s]
        out[by_s] = (np.exp(ps) * phi1(qs) - phi1(ps)) / s[by_s]
    if by_q.any():
        ps, qs = p[by_q], q[by_q]
        out[by_q] = (phi1(s[by_q]) - phi1(ps)) / qs
    near = ~far
    if near.any():
        # All three nodes lie within a unit disc: a 20-point rule is exact to rounding.
        pn, qn = p[near][:, None], q[near][:, None]
        u = _GL_X[None, :]
        out[near] = np.sum(_GL_W * np.exp(pn * u) * u * phi1(qn * u), axis=1)
    return out
