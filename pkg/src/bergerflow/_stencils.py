"""Finite-difference stencils on the cell-centered radial grid.

Ghost cells at the origin come from the parity of the field (even or odd
extension through x = 0).  Ghost cells past the outer edge come from
polynomial extrapolation, which turns a central stencil at the last cells
into the matching one-sided stencil.
"""

from math import comb

import numpy as np

EVEN = 1.0
ODD = -1.0


def extrapolate(f, nghost, degree):
    """Values at the ``nghost`` cells past the end of ``f``.

    Uses the polynomial of the given degree through the last ``degree + 1``
    samples, i.e. the ``degree + 1``-th forward difference is set to zero.
    """
    tail = list(f[-(degree + 1):])
    weights = [(-1) ** (j + 1) * comb(degree + 1, j) for j in range(1, degree + 2)]
    for _ in range(nghost):
        tail.append(sum(w * tail[-j] for j, w in enumerate(weights, start=1)))
    return np.array(tail[degree + 1:])


def pad(f, parity, nghost, degree):
    """Return ``f`` with ``nghost`` ghost cells on each side."""
    left = parity * f[nghost - 1::-1]
    right = extrapolate(f, nghost, degree)
    return np.concatenate([left, f, right])


def d1(f, h, parity, order=2):
    """First derivative; ``order`` is 2 or 4."""
    if order == 2:
        fe = pad(f, parity, 1, 3)
        return (fe[2:] - fe[:-2]) / (2.0 * h)
    if order == 4:
        fe = pad(f, parity, 2, 5)
        return (-fe[4:] + 8.0 * fe[3:-1] - 8.0 * fe[1:-3] + fe[:-4]) / (12.0 * h)
    raise ValueError(f"unsupported stencil order {order}")


def d2(f, h, parity, order=2):
    """Second derivative; ``order`` is 2 or 4."""
    if order == 2:
        fe = pad(f, parity, 1, 3)
        return (fe[2:] - 2.0 * fe[1:-1] + fe[:-2]) / h**2
    if order == 4:
        fe = pad(f, parity, 2, 5)
        return (-fe[4:] + 16.0 * fe[3:-1] - 30.0 * fe[2:-2] + 16.0 * fe[1:-3] - fe[:-4]) / (12.0 * h**2)
    raise ValueError(f"unsupported stencil order {order}")
