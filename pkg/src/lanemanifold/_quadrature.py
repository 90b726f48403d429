"""Fixed-order Gauss-Legendre panel quadrature shared by the modules.

Every routine here integrates a vectorised integrand over a sequence of
panels, either in the radius itself or in its logarithm.  The panel layout
is supplied by the caller, so the accuracy is controlled by how finely the
caller splits the domain.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Callable

import numpy as np

ArrayFn = Callable[[np.ndarray], np.ndarray]


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def panel_integrals(f: ArrayFn, edges: np.ndarray, order: int = 8) -> np.ndarray:
    """Integral of ``f`` over each panel ``[edges[i], edges[i+1]]``."""
    edges = np.asarray(edges, dtype=float)
    x, w = gauss_legendre(order)
    h = np.diff(edges)
    nodes = edges[:-1, None] + h[:, None] * x[None, :]
    vals = f(nodes.ravel()).reshape(nodes.shape)
    return (vals * w[None, :]).sum(axis=1) * h


def log_panel_integrals(f: ArrayFn, edges: np.ndarray, order: int = 8) -> np.ndarray:
    """Panel integrals computed in the variable ``t = log r`` (edges > 0)."""
    edges = np.asarray(edges, dtype=float)
    if np.any(edges <= 0):
        raise ValueError("log panels need positive edges")
    t = np.log(edges)
    x, w = gauss_legendre(order)
    h = np.diff(t)
    nodes = np.exp(t[:-1, None] + h[:, None] * x[None, :])
    vals = f(nodes.ravel()).reshape(nodes.shape) * nodes
    return (vals * w[None, :]).sum(axis=1) * h


def cumulative(f: ArrayFn, edges: np.ndarray, order: int = 8, log: bool = False) -> np.ndarray:
    """Running integral from ``edges[0]``; the first entry is zero."""
    pieces = log_panel_integrals(f, edges, order) if log else panel_integrals(f, edges, order)
    return np.concatenate(([0.0], np.cumsum(pieces)))


def refine(edges: np.ndarray, subdivisions: int) -> np.ndarray:
    """Split every interval of a strictly increasing grid into equal parts."""
    edges = np.asarray(edges, dtype=float)
    if subdivisions <= 1:
        return edges.copy()
    frac = np.arange(subdivisions) / subdivisions
    inner = edges[:-1, None] + np.diff(edges)[:, None] * frac[None, :]
    return np.concatenate((inner.ravel(), edges[-1:]))
