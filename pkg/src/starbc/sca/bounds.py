"""Surrogate bounds used by the successive convex approximation loops.

Every bound touches its target exactly at the expansion point; lower bounds
never exceed and upper bounds never fall below their targets anywhere.
"""

from __future__ import annotations

import numpy as np

LN2 = float(np.log(2.0))


def rate_lower_bound(s, i, s0, i0):
    """Affine-in-(s, i) lower bound of log2(1 + 1/(s i)) around (s0, i0)."""
    s0 = np.asarray(s0, dtype=float)
    i0 = np.asarray(i0, dtype=float)
    if np.any(s0 <= 0) or np.any(i0 <= 0):
        raise ValueError("slack local points must be strictly positive")
    base = np.log2(1.0 + 1.0 / (s0 * i0))
    return (base
            - (s - s0) / (LN2 * (s0 ** 2 * i0 + s0))
            - (i - i0) / (LN2 * (i0 ** 2 * s0 + i0)))


def bilinear_lower_bound(a, b, a0, b0):
    """Concave lower bound of the product ab around (a0, b0)."""
    return (a + b) * (a0 + b0) - (a0 + b0) ** 2 / 2.0 - (np.asarray(a) ** 2 + np.asarray(b) ** 2) / 2.0


def bilinear_upper_bound(x, y, x0, y0):
    """Convex upper bound of the product xy around (x0, y0)."""
    return ((np.asarray(x) + np.asarray(y)) ** 2 / 2.0
            - (x0 ** 2 + y0 ** 2) / 2.0
            - (x0 * (x - x0) + y0 * (y - y0)))


def leading_eigvec(u: np.ndarray) -> np.ndarray:
    """Unit eigenvector of the largest eigenvalue of a Hermitian matrix."""
    _, v = np.linalg.eigh(u)
    return v[:, -1]


def spectral_norm_tangent(u: np.ndarray, u0: np.ndarray) -> float:
    """Linearization of the spectral norm at u0, evaluated at u.

    Equals ||u0||_2 + Tr(v v^H (u - u0)) with v the leading eigenvector of
    u0; it under-estimates ||u||_2 everywhere, with equality at u = u0, so
    nuclear(u) - tangent over-estimates nuclear(u) - spectral(u).
    """
    v = leading_eigvec(u0)
    lead0 = float(np.linalg.eigvalsh(u0)[-1])
    return lead0 + float(np.real(v.conj() @ (u - u0) @ v))


def trace_product_lower_bound(a: np.ndarray, b: np.ndarray,
                              a0: np.ndarray, b0: np.ndarray) -> float:
    """Concave lower bound of Tr(AB) for Hermitian A, B around (A0, B0).

    Built from Tr(AB) = (||A+B||_F^2 - ||A-B||_F^2)/4 by linearizing the
    first (convex) square at the expansion point.
    """
    f = a0 + b0
    return 0.25 * (2.0 * float(np.real(np.trace((a + b) @ f.conj().T)))
                   - float(np.linalg.norm(f, "fro") ** 2)
                   - float(np.linalg.norm(a - b, "fro") ** 2))


def combined_gain_lower_bound(u_t: np.ndarray, w_j: np.ndarray, q_j: np.ndarray,
                              u_t0: np.ndarray, w_j0: np.ndarray) -> float:
    """Lower bound of the combined DL channel gain Tr(U_t Q_j W_j Q_j^H)."""
    g = q_j @ w_j @ q_j.conj().T
    g0 = q_j @ w_j0 @ q_j.conj().T
    return trace_product_lower_bound(u_t, g, u_t0, g0)
