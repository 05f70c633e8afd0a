"""Oblivious distributed firewall: a Bloom-filter blacklist secret-shared
across servers that evaluate membership queries without seeing the filter."""

from .bloom import BloomParams, derive_params
from .firewall import (
    FirewallState,
    SystemConfig,
    Verdict,
    eval_product_servers,
    eval_sum_server,
    firewall_init,
    gateway_decide,
    insert_rule,
)
from .sharing import SchemeConfig, Share, ShareVector

__version__ = "0.1.0"

__all__ = [
    "BloomParams",
    "derive_params",
    "FirewallState",
    "SystemConfig",
    "Verdict",
    "eval_product_servers",
    "eval_sum_server",
    "firewall_init",
    "gateway_decide",
    "insert_rule",
    "SchemeConfig",
    "Share",
    "ShareVector",
    "__version__",
]
