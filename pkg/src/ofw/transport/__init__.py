"""Wire protocol, deterministic simulation, and the networked runtime."""

from .adversary import AdversarySpec, PartyBehavior, TimingPolicy
from .sim import Scenario, SimReport, simulate
from .wire import (
    ConfigSync,
    ErrorMsg,
    Insert,
    InsertAck,
    Query,
    ResultBroadcast,
    ShareResponse,
    Vote,
    decode,
    encode,
)

__all__ = [
    "AdversarySpec",
    "PartyBehavior",
    "TimingPolicy",
    "Scenario",
    "SimReport",
    "simulate",
    "ConfigSync",
    "ErrorMsg",
    "Insert",
    "InsertAck",
    "Query",
    "ResultBroadcast",
    "ShareResponse",
    "Vote",
    "decode",
    "encode",
]
