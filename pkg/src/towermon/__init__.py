"""
towermon: ambient-vibration monitoring toolkit for slender masonry towers.

Subpackages by task: ``core`` (records, ingest, windows), ``dsp``
(filters, spectra), ``ssi`` (covariance-driven subspace identification),
``ema`` (H1/CMIF), ``modal`` (MAC, merging, tracking, statistics),
``response`` (levels, events, tilt), ``sim`` (synthetic campaigns) and
``cli``.
"""

__version__ = "0.1.0"
