"""Parallel (block-diagonal) QUBO composition, normalization and benchmarking."""

from .errors import (
    CapacityError,
    ConfigError,
    InvalidInputError,
    ParquboError,
    ProtocolError,
    TransportError,
)
from .qubo import Block, CompositeQubo, ProblemKind, Qubo, compose, decompose, energy

__version__ = "0.1.0"

__all__ = [
    "Block",
    "CapacityError",
    "CompositeQubo",
    "ConfigError",
    "InvalidInputError",
    "ParquboError",
    "ProblemKind",
    "ProtocolError",
    "Qubo",
    "TransportError",
    "compose",
    "decompose",
    "energy",
]
