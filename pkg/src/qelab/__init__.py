"""qelab: spectral and microlocal machinery on large regular graphs.

A numerical laboratory for eigenvector delocalization experiments:
random regular graph generation, harmonic analysis on the covering tree,
a cylinder-symbol calculus with its quantization, non-backtracking bond
operators, and a reproducible experiment suite with a CLI front end.
"""
from __future__ import annotations

__version__ = "0.1.0"
