"""Finite (q+1)-regular multigraphs seen as quotients of the (q+1)-regular tree.

The half-edge (directed bond) structure is primary: every undirected edge,
loops and parallel edges included, contributes two mutually reversed bonds.
Non-backtracking walks, tree-ball unrolling and injectivity radii are all
bond-level notions, which keeps multigraph corner cases exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .operators import GraphOperator

__all__ = [
    "GenerationError",
    "RegularGraph",
    "WalkLevel",
    "InjectivityStats",
    "generate_random_regular",
    "generate_bipartite_regular",
    "injectivity_radius",
    "injectivity_radii",
    "injectivity_stats",
    "adjacency_operator",
    "nonbacktracking_walks",
    "complete_graph",
    "complete_bipartite",
    "petersen_graph",
    "write_graph_file",
    "read_graph_file",
]

DEFAULT_RESAMPLE_BUDGET = 1000


class GenerationError(RuntimeError):
    """Random generation failed: parity, unattainable simplicity, or budget."""


@dataclass
class WalkLevel:
    """All non-backtracking walks of one length, in a fixed order.

    Walks are grouped by start vertex (the order is stable under extension).
    `parent` drops the last bond, `suffix` drops the first bond, and
    `child[i, slot]` extends walk i by the bond `out_bonds[end[i], slot]`
    (-1 marks the excluded backtracking slot).
    """

    start: np.ndarray
    end: np.ndarray
    parent: np.ndarray
    last_bond: np.ndarray
    suffix: np.ndarray
    child: np.ndarray


class RegularGraph:
    """A (q+1)-regular multigraph on n vertices with explicit bond structure."""

    def __init__(self, n: int, q: int, edges, bipartition=None):
        self.n = int(n)
        self.q = int(q)
        if self.q < 2:
            raise ValueError("branching number q must be >= 2")
        if self.n < 1:
            raise ValueError("need at least one vertex")
        deg = self.q + 1
        edges = [(int(u), int(v)) for u, v in edges]
        for u, v in edges:
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u},{v}) out of vertex range")
        if 2 * len(edges) != self.n * deg:
            raise ValueError(
                f"{len(edges)} edges cannot make a {deg}-regular graph on {self.n} vertices"
            )
        self.edges = edges

        m = len(edges)
        self.bond_origin = np.empty(2 * m, dtype=np.int64)
        self.bond_terminus = np.empty(2 * m, dtype=np.int64)
        for i, (u, v) in enumerate(edges):
            self.bond_origin[2 * i] = u
            self.bond_terminus[2 * i] = v
            self.bond_origin[2 * i + 1] = v
            self.bond_terminus[2 * i + 1] = u
        self.bond_reversal = np.arange(2 * m, dtype=np.int64) ^ 1

        degrees = np.bincount(self.bond_origin, minlength=self.n)
        if not np.all(degrees == deg):
            bad = int(np.flatnonzero(degrees != deg)[0])
            raise ValueError(f"vertex {bad} has {int(degrees[bad])} half-edges, expected {deg}")

        # bonds grouped by origin; within a vertex, ordered by bond id
        order = np.argsort(self.bond_origin, kind="stable")
        self.out_bonds = order.reshape(self.n, deg)
        self.bond_slot = np.empty(2 * m, dtype=np.int64)
        self.bond_slot[order] = np.tile(np.arange(deg), self.n)

        self.has_loops = any(u == v for u, v in edges)
        seen = set()
        multi = False
        for u, v in edges:
            key = (min(u, v), max(u, v))
            if key in seen:
                multi = True
                break
            seen.add(key)
        self.has_multiedges = multi
        self.simple = not self.has_loops and not self.has_multiedges

        if bipartition is not None:
            bipartition = np.asarray(bipartition, dtype=np.int8)
            if bipartition.shape != (self.n,):
                raise ValueError("bipartition must assign a side to every vertex")
            for u, v in edges:
                if bipartition[u] == bipartition[v]:
                    raise ValueError(f"edge ({u},{v}) violates the declared bipartition")
        self.bipartition = bipartition

        self._levels: list[WalkLevel] = []

    # -- basic structure -------------------------------------------------

    @property
    def num_bonds(self) -> int:
        return 2 * len(self.edges)

    def neighbors(self, x: int) -> np.ndarray:
        """Neighbor list with multiplicity (loops appear twice)."""
        return self.bond_terminus[self.out_bonds[x]]

    def adjacency_counts(self) -> np.ndarray:
        """Integer matrix of parallel-edge counts; a loop adds 2 on the diagonal."""
        counts = np.zeros((self.n, self.n), dtype=np.int64)
        np.add.at(counts, (self.bond_origin, self.bond_terminus), 1)
        return counts

    def adjacency_matrix(self) -> np.ndarray:
        """Neighbor-averaging matrix: symmetric, row sums exactly 1."""
        return self.adjacency_counts() / (self.q + 1)

    def is_connected(self) -> bool:
        seen = np.zeros(self.n, dtype=bool)
        seen[0] = True
        frontier = [0]
        while frontier:
            nxt = np.unique(self.bond_terminus[self.out_bonds[frontier].ravel()])
            nxt = nxt[~seen[nxt]]
            seen[nxt] = True
            frontier = list(nxt)
        return bool(seen.all())

    # -- non-backtracking walk table -------------------------------------

    def walks(self, depth: int) -> WalkLevel:
        """Walk level of the given length, built lazily and cached."""
        if depth < 0:
            raise ValueError("walk length must be >= 0")
        while len(self._levels) <= depth:
            self._extend_levels()
        return self._levels[depth]

    def walk_count(self, depth: int) -> int:
        if depth == 0:
            return self.n
        return self.n * (self.q + 1) * self.q ** (depth - 1)

    def _extend_levels(self) -> None:
        deg = self.q + 1
        if not self._levels:
            ids = np.arange(self.n, dtype=np.int64)
            none = np.full(self.n, -1, dtype=np.int64)
            # bond b as a length-1 walk gets id = its position in origin-grouped order,
            # so level-0 children are arange(n*(q+1)) laid out along out_bonds
            child = np.arange(self.n * deg, dtype=np.int64).reshape(self.n, deg)
            self._levels.append(WalkLevel(ids, ids, none, none, none, child))
            return

        prev = self._levels[-1]
        d = len(self._levels) - 1  # length of walks in prev
        cand = self.out_bonds[prev.end]  # (N, q+1) candidate bonds
        if d == 0:
            last_bond = cand.ravel()
            parent = np.repeat(np.arange(self.n, dtype=np.int64), deg)
            child_prev_ids = np.arange(last_bond.size, dtype=np.int64).reshape(self.n, deg)
        else:
            mask = cand != self.bond_reversal[prev.last_bond][:, None]
            flat = mask.ravel()
            last_bond = cand.ravel()[flat]
            parent = np.repeat(np.arange(prev.end.size, dtype=np.int64), self.q)
            child_prev_ids = np.full(cand.shape, -1, dtype=np.int64)
            child_prev_ids.ravel()[flat] = np.arange(last_bond.size)

        start = prev.start[parent]
        end = self.bond_terminus[last_bond]
        if d == 0:
            suffix = end.copy()
        else:
            # drop the first bond: extend the parent's suffix by the same last bond
            below = self._levels[d - 1]
            suffix = below.child[prev.suffix[parent], self.bond_slot[last_bond]]

        # patch the child table of the previous level now that ids exist
        self._levels[d] = WalkLevel(prev.start, prev.end, prev.parent,
                                    prev.last_bond, prev.suffix, child_prev_ids)
        none = np.full(last_bond.size, -1, dtype=np.int64)
        self._levels.append(WalkLevel(start, end, parent, last_bond, suffix, none))

    def start_slices(self, depth: int):
        """Offsets such that walks of `depth` starting at x occupy [off[x], off[x+1])."""
        self.walks(depth)
        per = 1 if depth == 0 else (self.q + 1) * self.q ** (depth - 1)
        return np.arange(self.n + 1, dtype=np.int64) * per

    def walk_vertices(self, depth: int, idx: int) -> tuple[int, ...]:
        """Vertex sequence (v0, ..., v_depth) of one walk."""
        verts = []
        d, i = depth, int(idx)
        while d > 0:
            lv = self.walks(d)
            verts.append(int(lv.end[i]))
            i = int(lv.parent[i])
            d -= 1
        verts.append(int(self.walks(0).start[i]))
        return tuple(reversed(verts))

    def walk_bonds(self, depth: int, idx: int) -> tuple[int, ...]:
        bonds = []
        d, i = depth, int(idx)
        while d > 0:
            lv = self.walks(d)
            bonds.append(int(lv.last_bond[i]))
            i = int(lv.parent[i])
            d -= 1
        return tuple(reversed(bonds))

    def resolve_walk(self, vertices) -> tuple[int, int]:
        """Map a vertex sequence to (depth, walk id).

        Raises if the sequence is not a non-backtracking walk, or if parallel
        edges make the bond sequence ambiguous.
        """
        vertices = [int(v) for v in vertices]
        depth = len(vertices) - 1
        if depth < 0:
            raise ValueError("a walk needs at least its start vertex")
        idx = vertices[0]
        if not 0 <= idx < self.n:
            raise ValueError("start vertex out of range")
        for d, v in enumerate(vertices[1:]):
            self.walks(d + 1)  # child tables of level d are filled when d+1 exists
            lv = self.walks(d)
            here = int(lv.end[idx]) if d > 0 else vertices[0]
            slots = [
                s for s, b in enumerate(self.out_bonds[here])
                if self.bond_terminus[b] == v and lv.child[idx, s] >= 0
            ]
            if not slots:
                raise ValueError(f"no non-backtracking step {here}->{v} at position {d}")
            if len(slots) > 1:
                raise ValueError("ambiguous walk: parallel edges; use bond ids instead")
            idx = int(lv.child[idx, slots[0]])
        return depth, idx


# -- generators ----------------------------------------------------------


def _graph_from_pairing(n: int, q: int, pairing: np.ndarray) -> RegularGraph:
    stubs = np.repeat(np.arange(n), q + 1)
    it = iter(pairing)
    edges = [(int(stubs[a]), int(stubs[b])) for a, b in zip(it, it)]
    return RegularGraph(n, q, edges)


def generate_random_regular(n: int, q: int, seed: int, require_simple: bool = True,
                            budget: int = DEFAULT_RESAMPLE_BUDGET) -> RegularGraph:
    """Configuration-model sample of a (q+1)-regular graph on n vertices.

    Stubs are paired uniformly at random; with `require_simple` the whole
    sample is rejected and redrawn until it has no loops and no parallel
    edges.  Deterministic for a given seed.
    """
    deg = q + 1
    if (n * deg) % 2 != 0:
        raise GenerationError(f"n*(q+1) = {n * deg} is odd; no {deg}-regular graph exists")
    if require_simple and n <= deg:
        raise GenerationError(f"a simple {deg}-regular graph needs more than {deg} vertices")
    rng = np.random.default_rng(seed)
    for _ in range(budget if require_simple else 1):
        g = _graph_from_pairing(n, q, rng.permutation(n * deg))
        if not require_simple or g.simple:
            return g
    raise GenerationError(f"no simple sample within {budget} attempts (n={n}, q={q})")


def generate_bipartite_regular(n_per_side: int, q: int, seed: int,
                               require_simple: bool = False,
                               budget: int = DEFAULT_RESAMPLE_BUDGET) -> RegularGraph:
    """Random (q+1)-regular bipartite graph with equal sides, bipartition recorded."""
    deg = q + 1
    if n_per_side < 1:
        raise GenerationError("need at least one vertex per side")
    if require_simple and n_per_side < deg:
        raise GenerationError(f"simple bipartite degree {deg} needs at least {deg} vertices per side")
    rng = np.random.default_rng(seed)
    sides = np.concatenate([np.zeros(n_per_side, dtype=np.int8),
                            np.ones(n_per_side, dtype=np.int8)])
    left = np.repeat(np.arange(n_per_side), deg)
    right = np.repeat(np.arange(n_per_side, 2 * n_per_side), deg)
    for _ in range(budget if require_simple else 1):
        perm = rng.permutation(n_per_side * deg)
        edges = list(zip(left.tolist(), right[perm].tolist()))
        g = RegularGraph(2 * n_per_side, q, edges, bipartition=sides)
        if not require_simple or g.simple:
            return g
    raise GenerationError(f"no simple bipartite sample within {budget} attempts")


# -- local geometry -----------------------------------------------------


def injectivity_radius(g: RegularGraph, x: int, cap: int | None = None) -> int:
    """Largest rho such that the tree ball of radius rho at a lift of x
    projects injectively: all non-backtracking walks from x of length <= rho
    have pairwise distinct endpoints across the whole ball."""
    if not 0 <= x < g.n:
        raise ValueError(f"vertex {x} out of range")
    if cap is None:
        cap = int(math.ceil(math.log(max(g.n, 2)) / math.log(g.q))) + 2
    seen = np.zeros(g.n, dtype=bool)
    seen[x] = True
    bonds = g.out_bonds[x].copy()
    for radius in range(1, cap + 1):
        ends = g.bond_terminus[bonds]
        uniq, counts = np.unique(ends, return_counts=True)
        if np.any(counts > 1) or np.any(seen[uniq]):
            return radius - 1
        seen[uniq] = True
        nxt = g.out_bonds[ends]  # (B, q+1)
        keep = nxt != g.bond_reversal[bonds][:, None]
        bonds = nxt[keep]
    return cap


def injectivity_radii(g: RegularGraph, cap: int | None = None) -> np.ndarray:
    return np.array([injectivity_radius(g, x, cap=cap) for x in range(g.n)], dtype=np.int64)


@dataclass(frozen=True)
class InjectivityStats:
    """Fraction of vertices whose injectivity radius falls below the probe."""

    radius_probed: int
    fraction: float
    rho: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("fraction out of [0, 1]")


def injectivity_stats(g: RegularGraph, R: int, rho: np.ndarray | None = None) -> InjectivityStats:
    """Count vertices with rho(x) < R; `rho` may be passed to avoid recomputation."""
    if R < 1:
        raise ValueError("probe radius must be >= 1")
    if rho is None:
        rho = injectivity_radii(g, cap=max(R, 1))
    frac = float(np.count_nonzero(rho < R)) / g.n
    return InjectivityStats(R, frac, np.asarray(rho))


def adjacency_operator(g: RegularGraph) -> GraphOperator:
    """The neighbor-averaging operator as a dense GraphOperator."""
    return GraphOperator(g.adjacency_matrix(), label="adjacency", space="vertex")


def nonbacktracking_walks(g: RegularGraph, x: int, length: int) -> list[tuple[int, ...]]:
    """All non-backtracking walks from x of the given length, as vertex tuples.

    Walks through parallel edges are listed with multiplicity."""
    if length < 0:
        raise ValueError("length must be >= 0")
    if not 0 <= x < g.n:
        raise ValueError(f"vertex {x} out of range")
    lv = g.walks(length)
    off = g.start_slices(length)
    return [g.walk_vertices(length, i) for i in range(int(off[x]), int(off[x + 1]))]


# -- named graphs --------------------------------------------------------


def complete_graph(k: int) -> RegularGraph:
    """K_k, a (k-1)-regular graph (q = k-2)."""
    edges = [(u, v) for u in range(k) for v in range(u + 1, k)]
    return RegularGraph(k, k - 2, edges)


def complete_bipartite(k: int) -> RegularGraph:
    """K_{k,k}, k-regular bipartite (q = k-1)."""
    edges = [(u, k + v) for u in range(k) for v in range(k)]
    sides = [0] * k + [1] * k
    return RegularGraph(2 * k, k - 1, edges, bipartition=sides)


def petersen_graph() -> RegularGraph:
    """The Petersen graph: 3-regular, girth 5."""
    outer = [(i, (i + 1) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    return RegularGraph(10, 2, outer + spokes + inner)


# -- file format ---------------------------------------------------------


def write_graph_file(g: RegularGraph, path) -> None:
    """Text format: first line "n q", then one line "u v" per edge (loops as "u u")."""
    with open(path, "w", newline="") as fh:
        fh.write(f"{g.n} {g.q}\n")
        for u, v in g.edges:
            fh.write(f"{u} {v}\n")


def read_graph_file(path) -> RegularGraph:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError("first line must be 'n q'")
        n, q = int(header[0]), int(header[1])
        edges = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            u, v = line.split()
            edges.append((int(u), int(v)))
    return RegularGraph(n, q, edges)
