"""Coded placement for caches of unequal size: exact-load schemes for three
users and for K users with small caches, with a bit-exact simulator."""

from .model import SystemConfig
from .scheme_smallmem import load_coded_K, load_uncoded_K
from .scheme_three import classify_region, load_coded_3, load_uncoded_3
from .verifier import verify_config

__all__ = [
    "SystemConfig",
    "classify_region",
    "load_coded_3",
    "load_uncoded_3",
    "load_coded_K",
    "load_uncoded_K",
    "verify_config",
]
