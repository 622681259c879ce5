"""Static WCET estimation: cache abstract interpretation, block timing,
IPET model construction and an exact rational ILP solver."""

from .addrres import SiteAddr, resolve_data_sites
from .blocktime import block_time
from .cacheanalysis import (
    ALWAYS_HIT,
    NOT_CLASSIFIED,
    PERSISTENT,
    CacheClass,
    dcache_analysis,
    icache_analysis,
)
from .ipet import IlpModel, PersVar, WcetReport, build_ipet, compute_wcet, solve_model
from .lp import IlpResult, LpResult, solve_ilp, solve_lp

__all__ = [
    "ALWAYS_HIT",
    "NOT_CLASSIFIED",
    "PERSISTENT",
    "CacheClass",
    "IlpModel",
    "IlpResult",
    "LpResult",
    "PersVar",
    "SiteAddr",
    "WcetReport",
    "block_time",
    "build_ipet",
    "compute_wcet",
    "dcache_analysis",
    "icache_analysis",
    "resolve_data_sites",
    "solve_ilp",
    "solve_lp",
    "solve_model",
]
