"""Secret sharing schemes and the multi-party arithmetic built on them."""

from .base import (
    SCHEME_ADDITIVE,
    SCHEME_SHAMIR,
    SchemeConfig,
    Share,
    ShareVector,
    additive_reveal,
    additive_share,
    add_const,
    lagrange_at_zero,
    local_add,
    mul_const,
    reveal,
    shamir_reveal,
    shamir_share,
    share_secret,
)
from .engine import ProtocolNetwork, run_round_protocol
from .protocols import (
    additive_smm,
    fanin_product,
    random_shared_invertible_pair,
    shamir_mul,
    tree_product,
)
from .storage import read_share_vector, write_share_vector

__all__ = [
    "SCHEME_ADDITIVE",
    "SCHEME_SHAMIR",
    "SchemeConfig",
    "Share",
    "ShareVector",
    "additive_reveal",
    "additive_share",
    "add_const",
    "lagrange_at_zero",
    "local_add",
    "mul_const",
    "reveal",
    "shamir_reveal",
    "shamir_share",
    "share_secret",
    "ProtocolNetwork",
    "run_round_protocol",
    "additive_smm",
    "fanin_product",
    "random_shared_invertible_pair",
    "shamir_mul",
    "tree_product",
    "read_share_vector",
    "write_share_vector",
]
