"""Sphere-averaging operators on the quotient graph.

The distance-k average S_k (uniform over non-backtracking walk counts)
is built by the three-term recursion with the adjacency operator; walk
enumeration over the tables is kept as an independent test oracle.
The Cesaro ergodic average of the S_k encodes the spectral-gap bound.
"""
from __future__ import annotations

import numpy as np

from . import harmonics as hm
from .graphs import RegularGraph
from .operators import GraphOperator

__all__ = [
    "walk_count_matrices",
    "sphere_average",
    "sphere_average_by_enumeration",
    "sphere_spectrum_discrepancy",
    "ergodic_average",
    "mean_zero_norm",
    "mean_zero_quadratic_form",
]


def walk_count_matrices(g: RegularGraph, kmax: int) -> list[np.ndarray]:
    """W_k[x, y] = number of non-backtracking walks of length k from x to y.

    Exact integer recursion: W_1 W_1 = W_2 + (q+1) I and
    W_1 W_k = W_{k+1} + q W_{k-1} for k >= 2."""
    if kmax < 0:
        raise ValueError("kmax must be >= 0")
    eye = np.eye(g.n, dtype=np.int64)
    out = [eye]
    if kmax == 0:
        return out
    c = g.adjacency_counts()
    out.append(c)
    for k in range(1, kmax):
        if k == 1:
            out.append(c @ c - (g.q + 1) * eye)
        else:
            out.append(c @ out[k] - g.q * out[k - 1])
    return out


def _normalized_recursion(g: RegularGraph, kmax: int) -> list[np.ndarray]:
    """S_k in float; stable (entries stay in [0, 1], row sums exactly 1)."""
    a = g.adjacency_matrix()
    eye = np.eye(g.n)
    out = [eye]
    if kmax >= 1:
        out.append(a)
    for k in range(2, kmax + 1):
        if k == 2:
            s2 = ((g.q + 1) * (a @ a) - eye) / g.q
            out.append(s2)
        else:
            out.append(((g.q + 1) * (a @ out[k - 1]) - out[k - 2]) / g.q)
    return out


def sphere_average(g: RegularGraph, k: int) -> GraphOperator:
    """Stochastic average over the tree-distance-k sphere (S_0 = identity)."""
    if k < 0:
        raise ValueError("k must be >= 0")
    mat = _normalized_recursion(g, k)[k]
    return GraphOperator(mat, label=f"S_{k}")


def sphere_average_by_enumeration(g: RegularGraph, k: int) -> np.ndarray:
    """Walk-count matrix assembled by explicit enumeration (test oracle)."""
    if k == 0:
        return np.eye(g.n, dtype=np.int64)
    lv = g.walks(k)
    counts = np.zeros((g.n, g.n), dtype=np.int64)
    np.add.at(counts, (lv.start, lv.end), 1)
    return counts


def sphere_spectrum_discrepancy(g: RegularGraph, k: int,
                                lam: np.ndarray | None = None) -> float:
    """Max distance between sorted eig(S_k) and the sorted spherical values
    phi_{s_j}(k) computed from the adjacency spectrum."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if lam is None:
        lam = np.linalg.eigvalsh(g.adjacency_matrix())
    sk = np.linalg.eigvalsh(sphere_average(g, k).matrix)
    predicted = np.sort([hm.spherical(hm.s_from_lambda(v, g.q), k, g.q)
                         for v in np.clip(lam, -1.0, 1.0)])
    return float(np.max(np.abs(np.sort(sk) - predicted)))


def ergodic_average(g: RegularGraph, T: int, stride: int = 2) -> GraphOperator:
    """(1/T^2) sum_{k,l < T} S_{stride*|k-l|}: self-adjoint, stochastic."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if stride not in (1, 2):
        raise ValueError("stride must be 1 or 2")
    sk = _normalized_recursion(g, stride * (T - 1))
    mat = T * np.eye(g.n)
    for m in range(1, T):
        mat += 2.0 * (T - m) * sk[stride * m]
    return GraphOperator(mat / (T * T), label=f"ergodic_avg(T={T},stride={stride})")


def mean_zero_norm(op: GraphOperator | np.ndarray) -> float:
    """Operator norm restricted to the orthogonal complement of constants."""
    mat = op.matrix if isinstance(op, GraphOperator) else np.asarray(op)
    n = mat.shape[0]
    proj = np.eye(n) - np.full((n, n), 1.0 / n)
    return float(np.max(np.abs(np.linalg.eigvalsh(proj @ mat @ proj))))


def mean_zero_quadratic_form(op: GraphOperator | np.ndarray, a: np.ndarray,
                             tol: float = 1e-10) -> float:
    """(1/n) <a, op a> for a mean-zero observable."""
    mat = op.matrix if isinstance(op, GraphOperator) else np.asarray(op)
    a = np.asarray(a, dtype=float)
    if abs(float(np.mean(a))) > tol:
        raise ValueError("observable is not mean-zero")
    return float(a @ (mat @ a)) / a.size
