"""Pseudospectral laboratory for a coupled Schrodinger-KdV system.

The package provides four layers, from the bottom up:

* :mod:`skdvlab.grid` -- periodic grids, spectral transforms, Sobolev and
  discrete Bourgain norms, randomized data of prescribed regularity.
* :mod:`skdvlab.phases` -- the quadratic/cubic resonance polynomials of the
  system, their composition algebra, and the frequency regions used by the
  normal-form (integrated-by-parts) evolution.
* :mod:`skdvlab.evolve` / :mod:`skdvlab.smoothing` -- classical and
  normal-form time integration with conservation diagnostics, plus
  frequency-smoothing probes for the Duhamel iterates.
* :mod:`skdvlab.catalog` / :mod:`skdvlab.fre` / :mod:`skdvlab.counterex` --
  a catalog of frequency-restricted estimates, a brute-force evaluator that
  sweeps modulation windows and fits scaling exponents, and growth harnesses
  for the ill-posedness counterexamples.

:mod:`skdvlab.runner` and :mod:`skdvlab.cli` wrap everything into config
driven batch runs with deterministic CSV/manifest output.
"""

from __future__ import annotations

__version__ = "0.1.0"

from skdvlab.grid import (
    Grid,
    Regularity,
    SpectralField,
    bourgain_norm,
    bracket,
    dealias,
    field_from_bytes,
    field_from_json,
    field_to_bytes,
    field_to_json,
    plane_wave,
    random_sobolev_data,
    sobolev_norm,
    to_physical,
    to_spectral,
)

__all__ = [
    "__version__",
    "Grid",
    "Regularity",
    "SpectralField",
    "bourgain_norm",
    "bracket",
    "dealias",
    "field_from_bytes",
    "field_from_json",
    "field_to_bytes",
    "field_to_json",
    "plane_wave",
    "random_sobolev_data",
    "sobolev_norm",
    "to_physical",
    "to_spectral",
]
