"""Correlation structure and volatility statistics of daily stock-market data.

Submodules
----------
timeseries  log-returns and panel alignment
rmt         correlation matrix eigenmodes against the Wishart null
sectors     sign-split subsectors and the anti-correlation statistic D
leverage    return-volatility correlation L(t) and exponential fits
recurrence  recurrence intervals and their power-law tails
synth       ground-truth generators
io          CSV ingestion, TSV/JSON writers
pipeline    run configuration and orchestration behind the ``smkt`` command
"""

__version__ = "0.1.0"

from .errors import SmktError  # noqa: E402,F401
