"""Quantization of cylinder symbols: kernels on the covering tree, the
periodized cutoff operator on the finite graph, and the radial fast path.

A tree-kernel entry attached to a walk of length d is

    K(x, w) = sum over boundary cylinders C of
              nu_x(C) * integral q^{(1/2 + i s) (2 j_C - d)} a(x, C, s) d mu(s)

with j_C the length of the common prefix of the cylinder and the walk
(the height increment along the ray is 2 j - d).  The graph operator sums
these over all non-backtracking walks between two vertices up to the
cutoff radius, which realizes the quotient periodization exactly because
tree-ball vertices correspond to non-backtracking walks.
"""
from __future__ import annotations

import math

import numpy as np

from . import harmonics as hm
from .graphs import RegularGraph, injectivity_radii
from .operators import GraphOperator, hs_norm
from .symbols import CylinderSymbol, _cone_measure, l2_mass, smooth_bump

__all__ = [
    "busemann_increment",
    "tree_kernel",
    "op_graph",
    "radial_multiplier",
    "hs_norm",
    "hs_bound",
    "adjacency_commutator",
]

MAX_RADIUS = 12


def busemann_increment(geodesic_walk, cylinder_walk) -> int:
    """Height increment h(y) - h(x) along any boundary point in the cylinder:
    2 j - d, with d the geodesic length and j the shared prefix length."""
    geo = list(geodesic_walk)
    cyl = list(cylinder_walk)
    d = len(geo) - 1
    if d < 0:
        raise ValueError("geodesic walk needs at least its start vertex")
    if len(cyl) - 1 < d:
        raise ValueError("cylinder walk must be at least as long as the geodesic")
    if geo[0] != cyl[0]:
        raise ValueError("walks must share the start vertex")
    j = 0
    while j < d and geo[j + 1] == cyl[j + 1]:
        j += 1
    return 2 * j - d


class _KernelPlan:
    """Shared machinery: Fourier moments and cone masses for one symbol."""

    def __init__(self, a: CylinderSymbol, r: int, nodes: int | None):
        g = a.graph
        self.a = a
        self.g = g
        self.r = int(r)
        q = g.q
        pmax = self.r + a.fourier_degree
        measure = hm.PlancherelMeasure(q)
        if nodes is None:
            moments = measure.fourier_moments(pmax, profile=a.profile)
        else:
            s, w = measure.nodes(nodes)
            wp = w * a.profile(s) if a.profile is not None else w
            phase = np.exp(1j * math.log(q) * np.outer(np.arange(-pmax, pmax + 1), s))
            moments = phase @ wp
        self.pmax = pmax
        self.J = moments  # index p + pmax

        # cone masses: G[t][m][prefix walk] = nu-weighted symbol mass of the
        # subtree cone below the prefix, for prefixes of length t <= depth-1
        steps = a.depth - 1
        self.steps = steps
        nu_leaf = _cone_measure(q, steps)
        cones: list[dict[int, np.ndarray]] = [dict() for _ in range(steps + 1)]
        cones[steps] = {m: table * nu_leaf for m, table in a.coeffs.items()}
        for t in range(steps - 1, -1, -1):
            suffix_parent = g.walks(t + 1).parent
            for m, table in cones[t + 1].items():
                acc = np.zeros(g.walk_count(t), dtype=complex)
                np.add.at(acc, suffix_parent, table)
                cones[t][m] = acc
        self.cones = cones

    def tail_coefficient(self, d: int, m: int) -> complex:
        """Scalar multiplying a_m at the depth-(steps) prefix: contributions
        of all prefix lengths j >= steps along a walk of length d."""
        q = self.g.q
        steps = self.steps
        total = 0.0 + 0.0j
        for j in range(steps, d):
            dnu = _cone_measure(q, j) - _cone_measure(q, j + 1)
            total += q ** (j - d / 2.0) * self.J[m + 2 * j - d + self.pmax] * dnu
        total += q ** (d / 2.0) * self.J[m + d + self.pmax] * _cone_measure(q, d)
        return total

    def kernel_level(self, d: int, subset: np.ndarray | None = None) -> np.ndarray:
        """Kernel values for all walks of length d (or a subset of them)."""
        g, q = self.g, self.g.q
        steps = self.steps
        lv_ids = np.arange(g.walk_count(d), dtype=np.int64) if subset is None \
            else np.asarray(subset, dtype=np.int64)
        # ancestors of each walk at prefix lengths 0..min(d, steps)
        anc: list[np.ndarray] = [None] * (d + 1)
        anc[d] = lv_ids
        for lvl in range(d, 0, -1):
            anc[lvl - 1] = g.walks(lvl).parent[anc[lvl]]
        out = np.zeros(lv_ids.size, dtype=complex)
        top = min(d, steps)
        for m in self.a.coeffs:
            # prefix lengths strictly below the cylinder resolution
            for j in range(top):
                h_j = self.cones[j][m][anc[j]]
                h_j1 = self.cones[j + 1][m][anc[j + 1]]
                out += q ** (j - d / 2.0) * self.J[m + 2 * j - d + self.pmax] * (h_j - h_j1)
            if d <= steps:
                out += q ** (d / 2.0) * self.J[m + d + self.pmax] \
                    * self.cones[d][m][anc[d]]
            else:
                out += self.tail_coefficient(d, m) * self.a.coeffs[m][anc[steps]]
        return out


def tree_kernel(a: CylinderSymbol, x: int, walk, nodes: int | None = None) -> complex:
    """Kernel entry of the tree operator between x and the endpoint of the
    given non-backtracking walk (as a vertex sequence starting at x)."""
    walk = [int(v) for v in walk]
    if walk and walk[0] != int(x):
        raise ValueError("walk must start at x")
    if not walk:
        walk = [int(x)]
    d, idx = a.graph.resolve_walk(walk)
    plan = _KernelPlan(a, max(d, 1), nodes)
    return complex(plan.kernel_level(d, subset=np.array([idx]))[0])


def op_graph(a: CylinderSymbol, r: int, cutoff=None,
             nodes: int | None = None) -> GraphOperator:
    """Periodized cutoff quantization: entry (x, y) sums the tree kernel over
    all non-backtracking walks x -> y of length <= r, damped by cutoff(d/r)."""
    if r < 1:
        raise ValueError("cutoff radius must be >= 1")
    if r > MAX_RADIUS:
        raise ValueError(f"cutoff radius {r} exceeds the dense-scale budget {MAX_RADIUS}")
    g = a.graph
    cutoff = cutoff if cutoff is not None else smooth_bump
    plan = _KernelPlan(a, r, nodes)
    mat = np.zeros((g.n, g.n), dtype=complex)
    for d in range(r + 1):
        damp = float(cutoff(d / r))
        if damp == 0.0:
            continue
        vals = plan.kernel_level(d) * damp
        lv = g.walks(d)
        np.add.at(mat, (lv.start, lv.end), vals)
    return GraphOperator(mat, label=f"Op(depth={a.depth},r={r})")


def radial_multiplier(g: RegularGraph, phi, r: int, cutoff=None,
                      nodes: int = 512) -> GraphOperator:
    """Quantization of a function of s alone, through the cheap radial path:
    kernel at walk distance d is the spherical coefficient
    integral phi(s) phi_s(d) d mu(s), cut off and summed over walk counts."""
    if r < 1:
        raise ValueError("cutoff radius must be >= 1")
    cutoff = cutoff if cutoff is not None else smooth_bump
    q = g.q
    svals, w = hm.PlancherelMeasure(q).nodes(nodes)
    sph = hm.spherical_band(svals, r, q)          # (r+1, nodes)
    coeff = sph @ (w * np.asarray(phi(svals)))    # radial kernel values
    damp = np.asarray(cutoff(np.arange(r + 1) / r), dtype=float)

    mat = np.zeros((g.n, g.n))
    eye = np.eye(g.n)
    amat = g.adjacency_matrix()
    w_prev, w_cur = eye, (q + 1) * amat
    mat += float(coeff[0]) * damp[0] * eye
    for d in range(1, r + 1):
        mat += float(coeff[d]) * damp[d] * w_cur
        if d < r:
            if d == 1:
                w_prev, w_cur = w_cur, (q + 1) * (amat @ w_cur) - (q + 1) * eye
            else:
                w_prev, w_cur = w_cur, (q + 1) * (amat @ w_cur) - q * w_prev
    return GraphOperator(mat, label=f"radial(r={r})")


def hs_bound(a: CylinderSymbol, r: int, rho: np.ndarray | None = None) -> float:
    """Upper bound for the squared Hilbert-Schmidt norm of the quantization:
    the full boundary L2 mass of the symbol plus q^r times the mass carried
    by vertices of injectivity radius <= r."""
    g = a.graph
    if rho is None:
        rho = injectivity_radii(g)
    full = l2_mass(a)
    short = l2_mass(a, vertex_mask=np.asarray(rho) <= r)
    return full + g.q ** r * short


def adjacency_commutator(g: RegularGraph, op: GraphOperator | np.ndarray) -> np.ndarray:
    """[laplacian, M] = [A - I, M] = A M - M A."""
    mat = op.matrix if isinstance(op, GraphOperator) else np.asarray(op)
    amat = g.adjacency_matrix()
    return amat @ mat - mat @ amat
