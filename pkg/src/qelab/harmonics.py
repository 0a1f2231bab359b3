"""Harmonic analysis on the (q+1)-regular tree.

Spectral parametrization of the adjacency band, spherical functions,
the Kesten-McKay eigenvalue density, the matching Plancherel density in
the spectral parameter, and Gauss-Legendre quadrature against it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "TEMPERED",
    "UNTEMPERED",
    "TRIVIAL",
    "QuadratureError",
    "SpectralParameter",
    "tau",
    "tempered_band",
    "lambda_from_s",
    "s_from_lambda",
    "spherical",
    "spherical_band",
    "kesten_mckay_density",
    "kesten_mckay_cdf",
    "plancherel_density",
    "PlancherelMeasure",
    "quadrature",
]

TEMPERED = "tempered"
UNTEMPERED = "untempered"
TRIVIAL = "trivial"

_TEMPERED_TOL = 1e-12


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not converge within the node budget."""


def tau(q: int) -> float:
    """Period of the spectral parameter: pi / ln q."""
    return math.pi / math.log(q)


def tempered_band(q: int) -> float:
    """Half-width 2*sqrt(q)/(q+1) of the tempered spectrum of the averaging operator."""
    return 2.0 * math.sqrt(q) / (q + 1)


@dataclass(frozen=True)
class SpectralParameter:
    """Parameter s with eigenvalue lam = (2 sqrt(q)/(q+1)) cos(s ln q).

    Tempered: s real in [0, tau].  Untempered: s = i t (lam > band) or
    s = tau + i t (lam < -band) with t in (0, 1/2].  Trivial: t = 1/2,
    i.e. lam = +-1.
    """

    kind: str
    s: complex
    q: int
    lam: float

    def __post_init__(self):
        predicted = lambda_from_s(self.s, self.q)
        if abs(predicted - self.lam) > 1e-12:
            raise ValueError(f"inconsistent parameter: lam={self.lam}, lam(s)={predicted}")

    @property
    def t(self) -> float:
        """Imaginary part of s (0 for tempered parameters)."""
        return float(self.s.imag)


def _unwrap(s) -> complex:
    return s.s if isinstance(s, SpectralParameter) else complex(s)


def lambda_from_s(s, q: int) -> float:
    """Eigenvalue of the averaging operator attached to a spectral parameter."""
    z = _unwrap(s) * math.log(q)
    val = tempered_band(q) * np.cos(z)
    return float(np.real(val))


def s_from_lambda(lam: float, q: int) -> SpectralParameter:
    """Inverse parametrization; round-trips with lambda_from_s to 1e-10."""
    lam = float(lam)
    if abs(lam) > 1.0 + 1e-9:
        raise ValueError(f"|lam| = {abs(lam)} exceeds 1")
    band = tempered_band(q)
    lnq = math.log(q)
    if abs(lam) <= band + _TEMPERED_TOL:
        x = min(1.0, max(-1.0, lam / band))
        s = math.acos(x) / lnq
        return SpectralParameter(TEMPERED, complex(s, 0.0), q, lambda_from_s(s, q))
    t = math.acosh(min(abs(lam), 1.0) / band) / lnq
    t = min(t, 0.5)
    s = complex(0.0, t) if lam > 0 else complex(tau(q), t)
    kind = TRIVIAL if abs(abs(lam) - 1.0) <= 1e-12 else UNTEMPERED
    return SpectralParameter(kind, s, q, lambda_from_s(s, q))


def spherical(s, k: int, q: int) -> float:
    """Spherical function value at distance k.

    phi_s(0) = 1, phi_s(1) = lam(s), and
    (q+1) lam phi_s(k) = phi_s(k-1) + q phi_s(k+1) for k >= 1.
    """
    if k < 0:
        raise ValueError("distance must be >= 0")
    theta = _unwrap(s) * math.log(q)
    sin_t = np.sin(theta)
    if abs(sin_t) > 1e-6:
        ratio = np.sin((k + 1) * theta) / sin_t
    else:
        # Chebyshev recursion for sin((k+1)x)/sin(x), stable near x = 0, pi
        c = 2.0 * np.cos(theta)
        u_prev, u = 1.0 + 0j, c
        if k == 0:
            ratio = u_prev
        else:
            for _ in range(k - 1):
                u_prev, u = u, c * u - u_prev
            ratio = u
    val = q ** (-k / 2.0) * (2.0 / (q + 1) * np.cos(k * theta) + (q - 1.0) / (q + 1) * ratio)
    return float(np.real(val))


def spherical_band(s: np.ndarray, kmax: int, q: int) -> np.ndarray:
    """Matrix phi[k, i] = phi_{s_i}(k) for real s strictly inside (0, tau)."""
    s = np.asarray(s, dtype=float)
    theta = s * math.log(q)
    sin_t = np.sin(theta)
    if np.any(np.abs(sin_t) < 1e-12):
        raise ValueError("grid must avoid the band edges s = 0, tau")
    ks = np.arange(kmax + 1)[:, None]
    ratio = np.sin((ks + 1) * theta[None, :]) / sin_t[None, :]
    out = (2.0 / (q + 1)) * np.cos(ks * theta[None, :]) + ((q - 1.0) / (q + 1)) * ratio
    return out * np.power(float(q), -ks / 2.0)


def kesten_mckay_density(lam, q: int):
    """Limiting eigenvalue density of the neighbor-averaging operator.

    Supported on [-band, band]; vanishes outside."""
    lam = np.asarray(lam, dtype=float)
    band = tempered_band(q)
    inside = np.abs(lam) <= band
    lam_c = np.where(inside, lam, 0.0)
    dens = np.sqrt(np.maximum(4.0 * q - (q + 1) ** 2 * lam_c ** 2, 0.0)) \
        / (2.0 * math.pi * (1.0 - lam_c ** 2))
    out = np.where(inside, dens, 0.0)
    return out if out.ndim else float(out)


@lru_cache(maxsize=8)
def _km_cdf_table(q: int, grid: int = 20001):
    band = tempered_band(q)
    xs = np.linspace(-band, band, grid)
    ys = kesten_mckay_density(xs, q)
    cdf = np.concatenate([[0.0], np.cumsum((ys[1:] + ys[:-1]) * 0.5 * np.diff(xs))])
    cdf /= cdf[-1]
    return xs, cdf


def kesten_mckay_cdf(lam, q: int):
    """Cumulative distribution of the limiting law (trapezoid table, interpolated)."""
    xs, cdf = _km_cdf_table(q)
    lam = np.asarray(lam, dtype=float)
    out = np.interp(lam, xs, cdf, left=0.0, right=1.0)
    return out if out.ndim else float(out)


def plancherel_density(s, q: int):
    """Density of the tree's spectral measure in the parameter s, mass 1 on [0, tau].

    Obtained from the Kesten-McKay density by the change of variables
    lam(s); equals the inverse-square Harish-Chandra normalization up to
    the chosen total mass."""
    s = np.asarray(s, dtype=float)
    lnq = math.log(q)
    st2 = np.sin(s * lnq) ** 2
    out = (2.0 * q * (q + 1) * lnq / math.pi) * st2 / ((q - 1.0) ** 2 + 4.0 * q * st2)
    return out if out.ndim else float(out)


class PlancherelMeasure:
    """Gauss-Legendre quadrature against the tree's Plancherel density on [0, tau]."""

    DEFAULT_NODES = 256
    MAX_NODES = 16384

    def __init__(self, q: int):
        self.q = int(q)
        self.tau = tau(q)
        self._cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def nodes(self, count: int) -> tuple[np.ndarray, np.ndarray]:
        """Nodes in (0, tau) and weights already multiplied by the density."""
        if count not in self._cache:
            xs, ws = np.polynomial.legendre.leggauss(count)
            s = 0.5 * self.tau * (xs + 1.0)
            w = 0.5 * self.tau * ws * plancherel_density(s, self.q)
            self._cache[count] = (s, w)
        return self._cache[count]

    def integrate(self, f, tol: float = 1e-9, start: int | None = None,
                  max_nodes: int | None = None):
        """Integral of f against the measure, with node doubling to `tol`."""
        count = start or self.DEFAULT_NODES
        cap = max_nodes or self.MAX_NODES
        s, w = self.nodes(count)
        val = np.dot(w, f(s))
        while count < cap:
            count *= 2
            s, w = self.nodes(count)
            new = np.dot(w, f(s))
            if abs(new - val) < tol:
                new = complex(new)
                return new.real if abs(new.imag) <= 1e-12 * (1.0 + abs(new)) else new
            val = new
        raise QuadratureError(f"no convergence to {tol} within {cap} nodes")

    def fourier_moments(self, pmax: int, profile=None, tol: float = 1e-11,
                        start: int | None = None) -> np.ndarray:
        """J[p] = integral of q^{ips} * profile(s) d mu(s) for p = -pmax..pmax.

        Returned as an array of length 2*pmax+1, index p + pmax."""
        lnq = math.log(self.q)
        count = start or max(self.DEFAULT_NODES, 4 * pmax)

        def moments(n):
            s, w = self.nodes(n)
            wp = w * profile(s) if profile is not None else w
            phase = np.exp(1j * lnq * np.outer(np.arange(-pmax, pmax + 1), s))
            return phase @ wp

        val = moments(count)
        while count < self.MAX_NODES:
            count *= 2
            new = moments(count)
            if np.max(np.abs(new - val)) < tol:
                return new
            val = new
        raise QuadratureError(f"fourier moments up to {pmax} did not converge")


def quadrature(f, q: int, nodes: int = PlancherelMeasure.DEFAULT_NODES,
               tol: float = 1e-9) -> float:
    """Integral of f over [0, tau] against the Plancherel measure."""
    return PlancherelMeasure(q).integrate(f, tol=tol, start=nodes)
