"""Cylinder symbols on a graph: functions a(x, omega, s) where the
boundary dependence runs through the first `depth` vertices of the ray
[x, omega) and the s-dependence is a finite Fourier series in q^{is}
(optionally multiplied by a smooth window profile).

Symbols are stored per graph, on the non-backtracking walk tables, which
realizes quotient invariance by construction.  The shift U (one step
toward the boundary), its adjoint transfer operator L, twisted Cesaro
averages, commutator symbols and boundary integrals all act on these
tables.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import harmonics as hm
from .graphs import RegularGraph

__all__ = [
    "MAX_DEPTH",
    "MAX_FOURIER",
    "BudgetError",
    "CylinderSymbol",
    "WindowProfile",
    "smooth_bump",
    "shift",
    "transfer",
    "fourier_shift",
    "commutator_symbol",
    "cesaro_average",
    "time_average",
    "boundary_integral",
    "boundary_means",
    "mean_prediction",
    "l2_mass",
]

MAX_DEPTH = 8
MAX_FOURIER = 64


class BudgetError(RuntimeError):
    """Depth or Fourier budget exceeded (iterated averages grow both)."""


def smooth_bump(t):
    """C-infinity bump: 1 on [-1/2, 1/2], supported in [-1, 1]."""
    t = np.abs(np.asarray(t, dtype=float))
    out = np.zeros_like(t)
    out[t <= 0.5] = 1.0
    mid = (t > 0.5) & (t < 1.0)
    if np.any(mid):
        u = 2.0 * (1.0 - t[mid])  # 0 at |t|=1, 1 at |t|=1/2
        f = np.exp(-1.0 / u)
        f1 = np.exp(-1.0 / (1.0 - u))
        out[mid] = f / (f + f1)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class WindowProfile:
    """Smooth spectral window chi((s - s0) / (2 delta)): identically 1 on
    [s0 - delta, s0 + delta], supported in [s0 - 2 delta, s0 + 2 delta]."""

    s0: float
    delta: float

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("window half-width must be positive")

    def __call__(self, s):
        return smooth_bump((np.asarray(s, dtype=float) - self.s0) / (2.0 * self.delta))


class CylinderSymbol:
    """a(x, omega, s) = profile(s) * sum_m a_m(x, omega) q^{i m s}, with
    a_m depending on the first `depth` vertices of [x, omega).

    Coefficient tables are arrays over the graph's non-backtracking walks
    of length depth-1 (depth 1 means a vertex function)."""

    def __init__(self, graph: RegularGraph, depth: int, coeffs: dict[int, np.ndarray],
                 profile=None):
        if depth < 1:
            raise ValueError("depth must be >= 1")
        if depth > MAX_DEPTH:
            raise BudgetError(f"depth {depth} exceeds budget {MAX_DEPTH}")
        size = graph.walk_count(depth - 1)
        clean: dict[int, np.ndarray] = {}
        for m, table in coeffs.items():
            m = int(m)
            if abs(m) > MAX_FOURIER:
                raise BudgetError(f"fourier index {m} exceeds budget {MAX_FOURIER}")
            table = np.array(table, dtype=complex)  # own the table; it gets frozen
            if table.shape != (size,):
                raise ValueError(f"table for index {m} has shape {table.shape}, "
                                 f"expected ({size},)")
            if np.any(table):
                clean[m] = table
        if not clean:
            clean = {0: np.zeros(size, dtype=complex)}
        self.graph = graph
        self.depth = int(depth)
        self.coeffs = clean
        self.profile = profile
        for table in clean.values():
            table.setflags(write=False)

    # -- constructors ------------------------------------------------------

    @classmethod
    def constant(cls, graph: RegularGraph, value=1.0, profile=None) -> "CylinderSymbol":
        return cls(graph, 1, {0: np.full(graph.n, value, dtype=complex)}, profile)

    @classmethod
    def from_vertex_function(cls, graph: RegularGraph, values,
                             profile=None) -> "CylinderSymbol":
        values = np.asarray(values, dtype=complex)
        if values.shape != (graph.n,):
            raise ValueError("vertex function must have one value per vertex")
        return cls(graph, 1, {0: values}, profile)

    @classmethod
    def pure_s(cls, graph: RegularGraph, fourier: dict[int, complex] | None = None,
               profile=None) -> "CylinderSymbol":
        """Symbol depending on s only."""
        coeffs = {m: np.full(graph.n, c, dtype=complex)
                  for m, c in (fourier or {0: 1.0}).items()}
        return cls(graph, 1, coeffs, profile)

    @classmethod
    def cylinder_indicator(cls, graph: RegularGraph, vertices) -> "CylinderSymbol":
        """Indicator of the boundary cylinder determined by one walk."""
        depth_steps, idx = graph.resolve_walk(vertices)
        table = np.zeros(graph.walk_count(depth_steps), dtype=complex)
        table[idx] = 1.0
        return cls(graph, depth_steps + 1, {0: table})

    @classmethod
    def random(cls, graph: RegularGraph, depth: int, fourier_degree: int,
               seed: int, profile=None) -> "CylinderSymbol":
        rng = np.random.default_rng(seed)
        size = graph.walk_count(depth - 1)
        coeffs = {m: rng.standard_normal(size) + 1j * rng.standard_normal(size)
                  for m in range(-fourier_degree, fourier_degree + 1)}
        return cls(graph, depth, coeffs, profile)

    # -- basic structure ---------------------------------------------------

    @property
    def fourier_degree(self) -> int:
        return max(abs(m) for m in self.coeffs)

    @property
    def table_size(self) -> int:
        return self.graph.walk_count(self.depth - 1)

    def eval_tables(self, s) -> np.ndarray:
        """Value on every walk at parameter(s) s; shape (n_walks,) or
        (n_walks, len(s))."""
        s = np.asarray(s, dtype=float)
        lnq = math.log(self.graph.q)
        scalar = s.ndim == 0
        svec = np.atleast_1d(s)
        out = np.zeros((self.table_size, svec.size), dtype=complex)
        for m, table in self.coeffs.items():
            out += table[:, None] * np.exp(1j * m * lnq * svec)[None, :]
        if self.profile is not None:
            out *= np.asarray(self.profile(svec))[None, :]
        return out[:, 0] if scalar else out

    def value(self, vertices, s) -> complex:
        """Evaluate at the cylinder given by a vertex walk of length depth-1."""
        depth_steps, idx = self.graph.resolve_walk(vertices)
        if depth_steps != self.depth - 1:
            raise ValueError(f"walk has {depth_steps} steps, symbol depth needs {self.depth - 1}")
        lnq = math.log(self.graph.q)
        val = sum(table[idx] * np.exp(1j * m * lnq * s) for m, table in self.coeffs.items())
        if self.profile is not None:
            val *= complex(np.asarray(self.profile(np.atleast_1d(float(s))))[0])
        return complex(val)

    def sup_norm(self) -> float:
        """Max over walks of the Fourier-coefficient l1 sum (an upper bound
        for sup over s, exact for a single mode)."""
        total = np.zeros(self.table_size)
        for table in self.coeffs.values():
            total += np.abs(table)
        return float(np.max(total))

    # -- arithmetic ---------------------------------------------------------

    def _check_compatible(self, other: "CylinderSymbol") -> None:
        if self.graph is not other.graph:
            raise ValueError("symbols live on different graphs")
        if self.profile is not other.profile:
            raise ValueError("symbols carry different s-profiles")

    def reduce_depth_exact(self) -> "CylinderSymbol":
        """Drop trailing coordinates the tables provably do not depend on.

        Children of one parent walk are contiguous in the tables, so the
        check is an exact bitwise comparison; the symbol is unchanged as a
        function."""
        sym = self
        while sym.depth >= 2:
            blocks = sym.table_size // sym.graph.walk_count(sym.depth - 2)
            reducible = True
            reduced = {}
            for m, table in sym.coeffs.items():
                view = table.reshape(-1, blocks)
                if not np.array_equal(view, np.broadcast_to(view[:, :1], view.shape)):
                    reducible = False
                    break
                reduced[m] = view[:, 0]
            if not reducible:
                break
            sym = CylinderSymbol(sym.graph, sym.depth - 1, reduced, sym.profile)
        return sym

    def extend_depth(self, depth: int) -> "CylinderSymbol":
        """Represent the same symbol at a larger depth."""
        if depth < self.depth:
            raise ValueError("can only extend to a larger depth")
        if depth == self.depth:
            return self
        if depth > MAX_DEPTH:
            raise BudgetError(f"depth {depth} exceeds budget {MAX_DEPTH}")
        # chase parents from level depth-1 down to the symbol's own level
        idx = np.arange(self.graph.walk_count(depth - 1), dtype=np.int64)
        for lvl in range(depth - 1, self.depth - 1, -1):
            idx = self.graph.walks(lvl).parent[idx]
        coeffs = {m: table[idx] for m, table in self.coeffs.items()}
        return CylinderSymbol(self.graph, depth, coeffs, self.profile)

    def __add__(self, other: "CylinderSymbol") -> "CylinderSymbol":
        self._check_compatible(other)
        depth = max(self.depth, other.depth)
        a = self.extend_depth(depth)
        b = other.extend_depth(depth)
        coeffs = {m: table.copy() for m, table in a.coeffs.items()}
        for m, table in b.coeffs.items():
            coeffs[m] = coeffs.get(m, 0) + table
        return CylinderSymbol(self.graph, depth, coeffs, self.profile)

    def __sub__(self, other: "CylinderSymbol") -> "CylinderSymbol":
        return self + (other * (-1.0))

    def __mul__(self, scalar) -> "CylinderSymbol":
        coeffs = {m: table * scalar for m, table in self.coeffs.items()}
        return CylinderSymbol(self.graph, self.depth, coeffs, self.profile)

    __rmul__ = __mul__

    def with_profile(self, profile) -> "CylinderSymbol":
        if self.profile is not None and profile is not None:
            raise ValueError("symbol already carries a profile")
        return CylinderSymbol(self.graph, self.depth, dict(self.coeffs), profile)

    # -- serialization -------------------------------------------------------

    def to_json(self) -> str:
        """Schema: {q, D, M, entries: [[x, walk, m, re, im], ...]}.

        Walks are vertex sequences, so round-tripping needs a simple graph
        (parallel edges would make them ambiguous)."""
        if self.profile is not None:
            raise ValueError("profiled symbols are not serializable")
        entries = []
        lvl = self.depth - 1
        for m, table in sorted(self.coeffs.items()):
            for idx in np.flatnonzero(np.abs(table) > 0):
                verts = self.graph.walk_vertices(lvl, int(idx))
                entries.append([int(verts[0]), list(verts[1:]), m,
                                float(table[idx].real), float(table[idx].imag)])
        return json.dumps({"q": self.graph.q, "D": self.depth,
                           "M": self.fourier_degree, "entries": entries})

    @classmethod
    def from_json(cls, graph: RegularGraph, text: str) -> "CylinderSymbol":
        data = json.loads(text)
        if data["q"] != graph.q:
            raise ValueError("branching number mismatch")
        depth = int(data["D"])
        coeffs: dict[int, np.ndarray] = {}
        for x, walk, m, re, im in data["entries"]:
            steps, idx = graph.resolve_walk([x] + list(walk))
            if steps != depth - 1:
                raise ValueError("entry walk length does not match depth")
            table = coeffs.setdefault(m, np.zeros(graph.walk_count(depth - 1), dtype=complex))
            table[idx] += re + 1j * im
        return cls(graph, depth, coeffs)


# -- shift and transfer operators ---------------------------------------


def shift(a: CylinderSymbol) -> CylinderSymbol:
    """(Ua)(x, omega, s) = a(x_1, omega, s): one step toward the boundary.

    Output depth grows by one: the value on (x, x_1, ..., x_D) is the
    input value on (x_1, ..., x_D)."""
    g = a.graph
    out_depth = a.depth + 1
    if out_depth > MAX_DEPTH:
        raise BudgetError(f"shift would exceed depth budget {MAX_DEPTH}")
    suffix = g.walks(out_depth - 1).suffix
    coeffs = {m: table[suffix] for m, table in a.coeffs.items()}
    return CylinderSymbol(g, out_depth, coeffs, a.profile)


def transfer(a: CylinderSymbol) -> CylinderSymbol:
    """(La)(x, omega, s) = (1/q) sum over the q neighbors y of x off the ray
    of a evaluated on (y, x, x_1, ...): the adjoint of the shift; LU = I.

    For depth >= 3 the off-ray exclusion is encoded by the walk tables and
    the depth drops by one.  For depth <= 2 the exclusion still depends on
    the first ray step, so the raw output has depth 2; trailing coordinates
    that provably cancel (as in LU = I) are reduced away exactly."""
    g = a.graph
    q = g.q
    if a.depth >= 3:
        out_depth = a.depth - 1
        suffix = g.walks(a.depth - 1).suffix
        coeffs = {}
        for m, table in a.coeffs.items():
            acc = np.zeros(g.walk_count(out_depth - 1), dtype=complex)
            np.add.at(acc, suffix, table)
            coeffs[m] = acc / q
        return CylinderSymbol(g, out_depth, coeffs, a.profile)
    lv1 = g.walks(1)
    coeffs = {}
    if a.depth == 2:
        # (La)(x, x1) = (1/q) sum over bonds b0 into x other than the reversal
        # of x -> x1, of a on the walk (o(b0), x); summing exactly the q
        # allowed prepends keeps LU = I exact
        walk_of_bond = g.bond_origin * (q + 1) + g.bond_slot
        incoming = walk_of_bond[g.bond_reversal[g.out_bonds]]   # (n, q+1)
        cand = incoming[lv1.start]                              # (walks, q+1)
        banned = walk_of_bond[g.bond_reversal[lv1.last_bond]]
        keep = cand != banned[:, None]
        gathered = cand[keep].reshape(-1, q)
        for m, table in a.coeffs.items():
            coeffs[m] = table[gathered].sum(axis=1) / q
    else:
        # (La)(x, x1) = ( sum_{y ~ x} a(y) - a(x1) ) / q
        counts = g.adjacency_counts()
        for m, table in a.coeffs.items():
            neighbor_sum = counts @ table
            coeffs[m] = (neighbor_sum[lv1.start] - table[lv1.end]) / q
    return CylinderSymbol(g, 2, coeffs, a.profile).reduce_depth_exact()


def fourier_shift(a: CylinderSymbol, m0: int) -> CylinderSymbol:
    """Multiply by q^{i m0 s}: shift every Fourier index by m0."""
    if m0 == 0:
        return a
    if max(abs(m + m0) for m in a.coeffs) > MAX_FOURIER:
        raise BudgetError(f"fourier shift by {m0} exceeds budget {MAX_FOURIER}")
    coeffs = {m + m0: table for m, table in a.coeffs.items()}
    return CylinderSymbol(a.graph, a.depth, coeffs, a.profile)


def commutator_symbol(a: CylinderSymbol) -> CylinderSymbol:
    """The symbol c with [laplacian, Op(a)] = Op(c) + small remainder:

        c = (sqrt(q)/(q+1)) * (q^{is} (Ua - a) + q^{-is} (La - a)).

    Depth grows by one and the Fourier degree by one."""
    q = a.graph.q
    ua = shift(a)
    la = transfer(a)
    depth = max(ua.depth, la.depth, a.depth)
    a_ext = a.extend_depth(depth)
    plus = fourier_shift(ua.extend_depth(depth) - a_ext, +1)
    minus = fourier_shift(la.extend_depth(depth) - a_ext, -1)
    return (plus + minus) * (math.sqrt(q) / (q + 1))


def cesaro_average(b: CylinderSymbol, N: int) -> CylinderSymbol:
    """(1/N) sum_{k<N} q^{2isk} U^k b: the twisted Cesaro average whose
    smallness in L2 is what the spectral gap buys."""
    if N < 1:
        raise ValueError("N must be >= 1")
    total = None
    term = b
    for k in range(N):
        shifted = fourier_shift(term, 2 * k)
        total = shifted if total is None else total + shifted
        if k + 1 < N:
            term = shift(term)
    return total * (1.0 / N)


def time_average(a: CylinderSymbol, T: int, stride: int = 1) -> CylinderSymbol:
    """(1/T) sum_{k<T} U^{stride k} a."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if stride not in (1, 2):
        raise ValueError("stride must be 1 or 2")
    total = None
    term = a
    for k in range(T):
        total = term if total is None else total + term
        if k + 1 < T:
            for _ in range(stride):
                term = shift(term)
    return total * (1.0 / T)


# -- boundary integrals ---------------------------------------------------


def _cone_measure(q: int, steps: int) -> float:
    """Harmonic measure of a boundary cylinder at the given walk length."""
    return 1.0 if steps == 0 else 1.0 / ((q + 1) * q ** (steps - 1))


def boundary_means(a: CylinderSymbol, s: float) -> np.ndarray:
    """Per-vertex boundary integral of a(x, ., s) against the harmonic measure."""
    g = a.graph
    steps = a.depth - 1
    values = a.eval_tables(float(s))
    nu = _cone_measure(g.q, steps)
    if steps == 0:
        return values * nu
    acc = np.zeros(g.n, dtype=complex)
    np.add.at(acc, g.walks(steps).start, values)
    return acc * nu


def boundary_integral(a: CylinderSymbol, x: int, s: float) -> complex:
    """Boundary integral of a(x, ., s): each depth-(D-1) cylinder carries
    measure 1/((q+1) q^{D-2}); a vertex function integrates to itself."""
    if not 0 <= x < a.graph.n:
        raise ValueError("vertex out of range")
    return complex(boundary_means(a, s)[x])


def mean_prediction(a: CylinderSymbol, s0: float) -> complex:
    """(1/n) sum over vertices of the boundary integral at s0: the value
    around which matrix elements of Op(a) concentrate in a window at s0."""
    return complex(np.mean(boundary_means(a, s0)))


def l2_mass(a: CylinderSymbol, vertex_mask: np.ndarray | None = None,
            nodes: int = 256) -> float:
    """sum_x integral |a(x, omega, s)|^2 d nu_x d mu(s), optionally over a
    subset of base vertices."""
    g = a.graph
    measure = hm.PlancherelMeasure(g.q)
    svals, w = measure.nodes(nodes)
    tables = a.eval_tables(svals)  # (walks, nodes)
    steps = a.depth - 1
    nu = _cone_measure(g.q, steps)
    weights = np.abs(tables) ** 2 @ w
    if vertex_mask is not None:
        starts = g.walks(steps).start if steps > 0 else np.arange(g.n)
        weights = weights[np.asarray(vertex_mask, dtype=bool)[starts]]
    return float(np.sum(weights) * nu)
