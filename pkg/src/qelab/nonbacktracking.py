"""The directed-bond non-backtracking operator and its spectral
correspondence with the vertex averaging operator: eigenvalue map,
multiplicities, explicit eigenvectors, orthogonalization, and the
Cesaro resolvent norm on the complement of constants."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .graphs import RegularGraph
from .operators import GraphOperator

__all__ = [
    "BondSpace",
    "BondPair",
    "OrthogonalPair",
    "CycleFamilies",
    "CesaroResolvent",
    "nonbacktracking_matrix",
    "bond_eigenvalues",
    "predicted_bond_spectrum",
    "bond_eigenvectors",
    "cycle_basis",
    "cycle_eigenvectors",
    "orthogonal_pair",
    "cesaro_resolvent_norms",
    "sphere_graph",
    "multiset_max_distance",
    "export_bonds_csv",
]

DOUBLE_ROOT_TOL = 1e-8


@dataclass(frozen=True)
class BondSpace:
    """Directed bonds with origin, terminus and the reversal involution."""

    q: int
    origin: np.ndarray
    terminus: np.ndarray
    reversal: np.ndarray

    @classmethod
    def from_graph(cls, g: RegularGraph) -> "BondSpace":
        return cls(g.q, g.bond_origin.copy(), g.bond_terminus.copy(),
                   g.bond_reversal.copy())

    @property
    def size(self) -> int:
        return self.origin.size

    def __post_init__(self):
        rev = self.reversal
        if not np.array_equal(rev[rev], np.arange(rev.size)):
            raise ValueError("reversal is not an involution")
        if not np.array_equal(self.origin[rev], self.terminus):
            raise ValueError("o(reversed bond) must equal t(bond)")


def _bondspace(g) -> BondSpace:
    return g if isinstance(g, BondSpace) else BondSpace.from_graph(g)


def nonbacktracking_matrix(g: RegularGraph | BondSpace) -> GraphOperator:
    """M[e, e'] = 1/q iff e' follows e without reversal; row sums 1."""
    bs = _bondspace(g)
    b = bs.size
    mat = np.zeros((b, b))
    follows = bs.origin[None, :] == bs.terminus[:, None]
    follows[np.arange(b), bs.reversal] = False
    mat[follows] = 1.0 / bs.q
    return GraphOperator(mat, label="nonbacktracking", space="bond")


def bond_eigenvalues(lam: float, q: int) -> tuple[complex, complex]:
    """The two bond-operator eigenvalues attached to a vertex eigenvalue
    lam not in {+-1}: 1/(q eps) over the roots eps of
    q eps^2 - (q+1) lam eps + 1 = 0, ordered by |eps_1| <= |eps_2|."""
    e1, e2 = _eps_roots(lam, q)
    return 1.0 / (q * e1), 1.0 / (q * e2)


def _eps_roots(lam: float, q: int) -> tuple[complex, complex]:
    disc = cmath.sqrt(complex((q + 1) ** 2 * lam * lam - 4.0 * q))
    e1 = ((q + 1) * lam - disc) / (2.0 * q)
    e2 = ((q + 1) * lam + disc) / (2.0 * q)
    if abs(e1) > abs(e2):
        e1, e2 = e2, e1
    return e1, e2


def _cycle_rank(g: RegularGraph) -> int:
    return len(g.edges) - g.n + 1


def predicted_bond_spectrum(lam: np.ndarray, g: RegularGraph,
                            trivial_tol: float = 1e-8) -> np.ndarray:
    """Full predicted multiset of bond-operator eigenvalues from the vertex
    spectrum: a conjugate/real pair per nontrivial eigenvalue, the trivial
    1 (and -1 iff bipartite), and the cycle eigenvalues +-1/q with
    multiplicities rank and rank-1 (rank if bipartite)."""
    lam = np.asarray(lam, dtype=float)
    q = g.q
    b = _cycle_rank(g)
    bipartite = bool(np.any(np.abs(lam + 1.0) <= trivial_tol))
    out = [1.0 + 0.0j]
    if bipartite:
        out.append(-1.0 + 0.0j)
    for v in lam:
        if abs(v - 1.0) <= trivial_tol or abs(v + 1.0) <= trivial_tol:
            continue
        out.extend(bond_eigenvalues(v, q))
    out.extend([1.0 / q + 0.0j] * b)
    out.extend([-1.0 / q + 0.0j] * (b if bipartite else b - 1))
    arr = np.asarray(out, dtype=complex)
    if arr.size != g.n * (q + 1):
        raise RuntimeError(f"predicted multiset has {arr.size} values, "
                           f"expected {g.n * (q + 1)}")
    return arr


@dataclass(frozen=True)
class BondPair:
    f1: np.ndarray
    f2: np.ndarray
    eps1: complex
    eps2: complex
    double_root: bool


def bond_eigenvectors(g: RegularGraph, phi: np.ndarray, lam: float) -> BondPair:
    """Lift a vertex eigenvector to the two bond eigenvectors
    f_i(e) = phi(t(e)) - eps_i phi(o(e)).

    At the band edges eps_1 = eps_2 (double root): only one eigenvector
    exists; the pair is returned equal and flagged."""
    if abs(abs(lam) - 1.0) <= 1e-10:
        raise ValueError("trivial eigenvalues +-1 do not produce bond pairs")
    phi = np.asarray(phi)
    e1, e2 = _eps_roots(lam, g.q)
    pt = phi[g.bond_terminus]
    po = phi[g.bond_origin]
    f1 = pt - e1 * po
    f2 = pt - e2 * po
    return BondPair(f1, f2, e1, e2, bool(abs(e1 - e2) <= DOUBLE_ROOT_TOL))


def cycle_basis(g: RegularGraph) -> list[list[int]]:
    """Fundamental circuits (as bond sequences) from a BFS spanning tree.

    Each non-tree edge closes the tree path between its endpoints; loops
    give length-1 circuits and parallel edges length-2 circuits."""
    if not g.is_connected():
        raise ValueError("cycle basis needs a connected graph")
    parent_bond = np.full(g.n, -1, dtype=np.int64)  # bond pointing back towards the root
    depth = np.full(g.n, -1, dtype=np.int64)
    depth[0] = 0
    frontier = [0]
    tree_edges: set[int] = set()
    while frontier:
        nxt = []
        for x in frontier:
            for bond in g.out_bonds[x]:
                y = int(g.bond_terminus[bond])
                if depth[y] < 0:
                    depth[y] = depth[x] + 1
                    parent_bond[y] = int(g.bond_reversal[bond])
                    tree_edges.add(int(bond) // 2)
                    nxt.append(y)
        frontier = nxt
    if np.any(depth < 0):
        raise ValueError("cycle basis needs a connected graph")

    circuits = []
    for eid, (u, v) in enumerate(g.edges):
        if eid in tree_edges:
            continue
        if u == v:
            circuits.append([2 * eid])
            continue
        # circuit: v -> ... -> ancestor -> ... -> u, closed by the bond u -> v
        uu, vv = u, v
        up_u, up_v = [], []
        while depth[uu] > depth[vv]:
            up_u.append(int(parent_bond[uu]))
            uu = int(g.bond_terminus[parent_bond[uu]])
        while depth[vv] > depth[uu]:
            up_v.append(int(parent_bond[vv]))
            vv = int(g.bond_terminus[parent_bond[vv]])
        while uu != vv:
            up_u.append(int(parent_bond[uu]))
            uu = int(g.bond_terminus[parent_bond[uu]])
            up_v.append(int(parent_bond[vv]))
            vv = int(g.bond_terminus[parent_bond[vv]])
        down_u = [int(g.bond_reversal[bd]) for bd in reversed(up_u)]
        circuits.append(up_v + down_u + [2 * eid])
    return circuits


@dataclass(frozen=True)
class CycleFamilies:
    """Bond eigenvector families attached to the cycle space.

    `plus` spans the +1/q eigenspace (odd vectors, one per fundamental
    circuit).  `minus` spans the -1/q eigenspace: even circuits give even
    vectors directly; each further odd circuit is paired with a reference
    odd circuit through a connecting path, forming an even closed walk
    whose even vector is an exact eigenvector.  (A bare odd circuit leaves
    a defect supported on the bonds into its basepoint, so pairing has to
    run through a common basepoint.)"""

    plus: np.ndarray
    minus: np.ndarray


def _odd_vector(g: RegularGraph, walk) -> np.ndarray:
    vec = np.zeros(2 * len(g.edges))
    for bond in walk:
        vec[bond] += 1.0
        vec[g.bond_reversal[bond]] -= 1.0
    return vec


def _even_vector(g: RegularGraph, walk) -> np.ndarray:
    vec = np.zeros(2 * len(g.edges))
    for j, bond in enumerate(walk, start=1):
        sign = -1.0 if j % 2 else 1.0
        vec[bond] += sign
        vec[g.bond_reversal[bond]] += sign
    return vec


def _bfs_path_bonds(g: RegularGraph, u: int, v: int) -> list[int]:
    """Bond sequence of a shortest path u -> v."""
    if u == v:
        return []
    back = np.full(g.n, -1, dtype=np.int64)  # bond used to reach the vertex
    back[u] = -2
    frontier = [u]
    while frontier and back[v] == -1:
        nxt = []
        for x in frontier:
            for bond in g.out_bonds[x]:
                y = int(g.bond_terminus[bond])
                if back[y] == -1:
                    back[y] = int(bond)
                    nxt.append(y)
        frontier = nxt
    if back[v] == -1:
        raise ValueError("no path: graph disconnected")
    bonds = []
    x = v
    while x != u:
        bonds.append(int(back[x]))
        x = int(g.bond_origin[back[x]])
    return list(reversed(bonds))


def cycle_eigenvectors(g: RegularGraph) -> CycleFamilies:
    circuits = cycle_basis(g)
    nb = 2 * len(g.edges)
    plus = np.stack([_odd_vector(g, c) for c in circuits], axis=1) \
        if circuits else np.zeros((nb, 0))
    evens = [c for c in circuits if len(c) % 2 == 0]
    odds = [c for c in circuits if len(c) % 2 == 1]
    minus_cols = [_even_vector(g, c) for c in evens]
    if len(odds) >= 2:
        ref = odds[0]
        ref_base = int(g.bond_origin[ref[0]])
        for circ in odds[1:]:
            base = int(g.bond_origin[circ[0]])
            path = _bfs_path_bonds(g, base, ref_base)
            path_back = [int(g.bond_reversal[b]) for b in reversed(path)]
            walk = list(circ) + path + list(ref) + path_back
            minus_cols.append(_even_vector(g, walk))
    minus = np.stack(minus_cols, axis=1) if minus_cols else np.zeros((nb, 0))
    return CycleFamilies(plus=plus, minus=minus)


@dataclass(frozen=True)
class OrthogonalPair:
    f1: np.ndarray
    f2_orth: np.ndarray
    mu: complex
    block: np.ndarray
    star: complex
    double_root: bool


def orthogonal_pair(g: RegularGraph, phi: np.ndarray, lam: float) -> OrthogonalPair:
    """Replace the oblique pair (f_1, f_2) by (f_1, f_2') with
    f_2'(e) = phi(t(e)) - mu phi(o(e)), mu = (conj(eps_1) lam - 1)/(conj(eps_1) - lam),
    which is orthogonal to f_1; return the upper-triangular 2x2 matrix of the
    bond operator on their span."""
    pair = bond_eigenvectors(g, phi, lam)
    e1 = pair.eps1
    mu = (np.conj(e1) * lam - 1.0) / (np.conj(e1) - lam)
    phi = np.asarray(phi)
    f2p = phi[g.bond_terminus] - mu * phi[g.bond_origin]
    u1 = pair.f1 / np.linalg.norm(pair.f1)
    u2 = f2p / np.linalg.norm(f2p)
    m = nonbacktracking_matrix(g).matrix
    block = np.array([
        [np.vdot(u1, m @ u1), np.vdot(u1, m @ u2)],
        [np.vdot(u2, m @ u1), np.vdot(u2, m @ u2)],
    ])
    return OrthogonalPair(pair.f1, f2p, mu, block, block[0, 1], pair.double_root)


@dataclass(frozen=True)
class CesaroResolvent:
    N: int
    s: float
    norm: float
    flagged: bool
    note: str = ""


def cesaro_resolvent_norms(g: RegularGraph | BondSpace, n_values, s: float,
                           q: int | None = None) -> list[CesaroResolvent]:
    """Norms of (1/N^2) sum_{k<N} sum_{j<=k} q^{2isj} M^j on the orthogonal
    complement of constants, by power accumulation and largest singular value.

    A phase q^{2is} near -1 is flagged: with only a one-sided gap (bipartite
    case) no decay is guaranteed there."""
    bs = _bondspace(g)
    q = bs.q if q is None else q
    n_values = sorted(int(v) for v in n_values)
    if n_values[0] < 1:
        raise ValueError("N must be >= 1")
    zeta = np.exp(2j * s * math.log(q))
    flagged = bool(abs(zeta + 1.0) < 0.2)
    note = "phase near -1: one-sided-gap regime, no decay guaranteed" if flagged else ""
    m = nonbacktracking_matrix(bs).matrix
    b = m.shape[0]
    proj = np.eye(b) - np.full((b, b), 1.0 / b)
    out = []
    # weight of M^j in the double sum is (N - j); track sum(z^j M^j) and
    # sum(j z^j M^j) so every target N is read off without storing powers
    p0 = np.zeros((b, b), dtype=complex)
    p1 = np.zeros((b, b), dtype=complex)
    power = np.eye(b)
    targets = set(n_values)
    for j in range(n_values[-1]):
        term = (zeta ** j) * power
        p0 += term
        p1 += j * term
        if j + 1 in targets:
            nval = j + 1
            total = (nval * p0 - p1) / (nval * nval)
            restricted = proj @ total @ proj
            out.append(CesaroResolvent(nval, float(s),
                                       float(np.linalg.norm(restricted, 2)),
                                       flagged, note))
        if j + 1 < n_values[-1]:
            power = power @ m
    return out


def sphere_graph(g: RegularGraph, D: int) -> RegularGraph:
    """Auxiliary multigraph whose adjacency counts non-backtracking walks of
    length D: it is (q+1)q^{D-1}-regular on the same vertex set."""
    if D < 2:
        raise ValueError("D must be >= 2")
    from .averaging import walk_count_matrices

    w = walk_count_matrices(g, D)[D]
    if np.any(w.diagonal() % 2 != 0):
        raise RuntimeError("odd closed-walk count; reversal pairing broken")
    edges = []
    for x in range(g.n):
        for _ in range(int(w[x, x]) // 2):
            edges.append((x, x))
        for y in range(x + 1, g.n):
            for _ in range(int(w[x, y])):
                edges.append((x, y))
    return RegularGraph(g.n, (g.q + 1) * g.q ** (D - 1) - 1, edges)


def multiset_max_distance(predicted: np.ndarray, computed: np.ndarray,
                          tol_fast: float = 1e-6) -> float:
    """Max pairing distance between two complex multisets.

    Fast path: sort by (re, im) and compare elementwise.  If that exceeds
    `tol_fast` (ordering ties), fall back to optimal assignment."""
    a = np.sort_complex(np.asarray(predicted, dtype=complex))
    b = np.sort_complex(np.asarray(computed, dtype=complex))
    if a.size != b.size:
        raise ValueError("multisets differ in size")
    fast = float(np.max(np.abs(a - b))) if a.size else 0.0
    if fast <= tol_fast or a.size > 4000:
        return fast
    from scipy.optimize import linear_sum_assignment

    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def export_bonds_csv(g: RegularGraph | BondSpace, path) -> None:
    """Columns: bond, origin, terminus, reversal."""
    bs = _bondspace(g)
    with open(path, "w", newline="") as fh:
        fh.write("bond,origin,terminus,reversal\n")
        for e in range(bs.size):
            fh.write(f"{e},{bs.origin[e]},{bs.terminus[e]},{bs.reversal[e]}\n")
