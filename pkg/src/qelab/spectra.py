"""Eigendecomposition of the averaging operator, spectral parameters,
gap measurement, spectral windows, and window-count checks against the
limiting eigenvalue law."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import harmonics as hm
from .graphs import RegularGraph
from .operators import GraphOperator

__all__ = [
    "SpectralData",
    "SpectralWindow",
    "GapReport",
    "WindowCountCheck",
    "WeylCheck",
    "eig",
    "decompose",
    "spectral_gap",
    "window",
    "kesten_mckay_window_check",
    "weyl_trace_check",
    "ks_distance",
    "export_spectrum_csv",
]

_TRIVIAL_TOL = 1e-8


@dataclass
class SpectralData:
    """Full eigendecomposition with spectral parameters.

    Eigenvalues ascending; psi[:, j] is the j-th orthonormal eigenvector.
    `s` holds the real tempered parameter and NaN on untempered modes;
    `params` has the full classification for every mode.
    """

    q: int
    lam: np.ndarray
    psi: np.ndarray
    params: list[hm.SpectralParameter]
    s: np.ndarray
    tempered: np.ndarray
    bipartite: bool

    @property
    def n(self) -> int:
        return self.lam.size


@dataclass(frozen=True)
class SpectralWindow:
    """Indices of tempered modes with |s_j - s0| <= delta."""

    s0: float
    delta: float
    indices: np.ndarray
    count: int

    @property
    def empty(self) -> bool:
        return self.count == 0


@dataclass(frozen=True)
class GapReport:
    beta: float
    upper_gap: float          # 1 - max nontrivial eigenvalue
    lower_gap: float          # 1 + min nontrivial eigenvalue (after exclusions)
    excluded_minus_one: bool
    alon_boppana_gap: float   # 1 - 2 sqrt(q)/(q+1), reporting benchmark

    @property
    def exp_ok(self) -> bool:
        return self.beta > 0.0


def _rotate_degenerate(lam: np.ndarray, psi: np.ndarray, seed: int,
                       tol: float = 1e-9) -> np.ndarray:
    """Apply a seeded random orthogonal rotation inside each near-degenerate
    eigenvalue cluster.  The variance statistic is basis dependent within
    eigenspaces; this makes that dependence reproducible instead of
    solver-dependent."""
    rng = np.random.default_rng(seed)
    psi = psi.copy()
    i = 0
    n = lam.size
    while i < n:
        j = i + 1
        while j < n and lam[j] - lam[j - 1] <= tol:
            j += 1
        if j - i >= 2:
            gauss = rng.standard_normal((j - i, j - i))
            qmat, _ = np.linalg.qr(gauss)
            psi[:, i:j] = psi[:, i:j] @ qmat
        i = j
    return psi


def eig(op, q: int, rotate_degenerate_seed: int | None = None,
        check_tol: float = 1e-8) -> SpectralData:
    """Dense symmetric eigendecomposition with residual and orthonormality checks."""
    mat = op.matrix if isinstance(op, GraphOperator) else np.asarray(op, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("need a square matrix")
    if np.max(np.abs(mat - mat.T)) > 1e-10:
        raise ValueError("matrix is not symmetric")
    lam, psi = scipy.linalg.eigh(mat)
    if rotate_degenerate_seed is not None:
        psi = _rotate_degenerate(lam, psi, rotate_degenerate_seed)

    scale = max(1.0, float(np.max(np.abs(lam))))
    residual = np.max(np.abs(mat @ psi - psi * lam[None, :]))
    if residual > check_tol * scale:
        raise RuntimeError(f"eigendecomposition residual {residual} too large")
    gram = psi.T @ psi
    if np.max(np.abs(gram - np.eye(lam.size))) > check_tol:
        raise RuntimeError("eigenvectors not orthonormal")

    params = [hm.s_from_lambda(min(1.0, max(-1.0, v)), q) for v in lam]
    tempered = np.array([p.kind == hm.TEMPERED for p in params])
    s = np.array([p.s.real if p.kind == hm.TEMPERED else np.nan for p in params])
    bipartite = bool(np.any(np.abs(lam + 1.0) <= _TRIVIAL_TOL))
    return SpectralData(q=q, lam=lam, psi=psi, params=params, s=s,
                        tempered=tempered, bipartite=bipartite)


def decompose(g: RegularGraph, rotate_degenerate_seed: int | None = None) -> SpectralData:
    """Eigendecomposition of the neighbor-averaging operator of a graph."""
    return eig(g.adjacency_matrix(), g.q, rotate_degenerate_seed=rotate_degenerate_seed)


def spectral_gap(sd: SpectralData, exclude_minus_one: bool | None = None) -> GapReport:
    """Distance of the nontrivial spectrum from +-1.

    The trivial eigenvalue 1 (Perron) is always excluded; -1 is excluded
    in bipartite mode (default: automatic when -1 is in the spectrum)."""
    lam = sd.lam
    top = np.abs(lam - 1.0) <= _TRIVIAL_TOL
    if not np.any(top):
        raise ValueError("no eigenvalue 1: not an averaging operator?")
    if int(np.count_nonzero(top)) > 1:
        raise ValueError("eigenvalue 1 is multiple: graph is disconnected")
    if exclude_minus_one is None:
        exclude_minus_one = sd.bipartite
    drop = top.copy()
    if exclude_minus_one:
        drop |= np.abs(lam + 1.0) <= _TRIVIAL_TOL
    rest = lam[~drop]
    if rest.size == 0:
        raise ValueError("no nontrivial spectrum left")
    upper = float(1.0 - np.max(rest))
    lower = float(1.0 + np.min(rest))
    return GapReport(
        beta=min(upper, lower),
        upper_gap=upper,
        lower_gap=lower,
        excluded_minus_one=bool(exclude_minus_one),
        alon_boppana_gap=1.0 - hm.tempered_band(sd.q),
    )


def window(sd: SpectralData, s0: float, delta: float) -> SpectralWindow:
    """Tempered modes with spectral parameter within delta of s0."""
    if not 0.0 < s0 < hm.tau(sd.q):
        raise ValueError("window center must lie inside (0, tau)")
    if delta <= 0:
        raise ValueError("window half-width must be positive")
    inside = sd.tempered & (np.abs(sd.s - s0) <= delta)
    idx = np.flatnonzero(inside)
    return SpectralWindow(float(s0), float(delta), idx, int(idx.size))


@dataclass(frozen=True)
class WindowCountCheck:
    count: int
    predicted_linear: float    # 2 n delta * density(s0)
    predicted_integral: float  # n * mu([s0-delta, s0+delta])
    ratio_linear: float
    ratio_integral: float


def kesten_mckay_window_check(sd: SpectralData, s0: float, delta: float) -> WindowCountCheck:
    """Window count against the limiting-law prediction, linearized and exact."""
    win = window(sd, s0, delta)
    n = sd.n
    linear = 2.0 * n * delta * hm.plancherel_density(s0, sd.q)
    lo, hi = max(0.0, s0 - delta), min(hm.tau(sd.q), s0 + delta)
    xs = np.linspace(lo, hi, 4097)
    mass = np.trapezoid(hm.plancherel_density(xs, sd.q), xs)
    integral = n * float(mass)
    return WindowCountCheck(
        count=win.count,
        predicted_linear=float(linear),
        predicted_integral=integral,
        ratio_linear=win.count / linear if linear > 0 else math.inf,
        ratio_integral=win.count / integral if integral > 0 else math.inf,
    )


@dataclass(frozen=True)
class WeylCheck:
    sum_profile_sq: float      # sum_j chi_n(s_j)^2 over tempered modes
    integral_times_n: float    # n * integral of chi_n^2 d mu
    trace_op_sq: float         # Tr Op(chi_n)^2 = HS norm squared


def weyl_trace_check(g: RegularGraph, profile, r: int,
                     sd: SpectralData | None = None) -> WeylCheck:
    """Three-way count comparison: eigenvalue sum, measure mass, operator trace."""
    from .quantize import radial_multiplier  # local import; quantize builds on this module's deps

    if sd is None:
        sd = decompose(g)
    svals = sd.s[sd.tempered]
    lhs = float(np.sum(profile(svals) ** 2))
    measure = hm.PlancherelMeasure(g.q)
    mass = measure.integrate(lambda s: profile(s) ** 2, tol=1e-10)
    op = radial_multiplier(g, profile, r)
    tr = float(np.sum(np.abs(op.matrix) ** 2))
    return WeylCheck(lhs, g.n * float(mass), tr)


def ks_distance(sd: SpectralData) -> float:
    """Kolmogorov-Smirnov distance between the empirical eigenvalue law
    and the limiting density."""
    lam = np.sort(sd.lam)
    n = lam.size
    cdf = hm.kesten_mckay_cdf(lam, sd.q)
    ecdf_hi = np.arange(1, n + 1) / n
    ecdf_lo = np.arange(0, n) / n
    return float(max(np.max(np.abs(ecdf_hi - cdf)), np.max(np.abs(cdf - ecdf_lo))))


def export_spectrum_csv(sd: SpectralData, path, s0: float | None = None,
                        delta: float | None = None) -> None:
    """Columns: j, lambda, s, tempered, window_member."""
    member = np.zeros(sd.n, dtype=int)
    if s0 is not None and delta is not None:
        member[window(sd, s0, delta).indices] = 1
    with open(path, "w", newline="") as fh:
        fh.write("j,lambda,s,tempered,window_member\n")
        for j in range(sd.n):
            s_txt = f"{sd.s[j]:.12g}" if sd.tempered[j] else ""
            fh.write(f"{j},{sd.lam[j]:.12g},{s_txt},{int(sd.tempered[j])},{member[j]}\n")
