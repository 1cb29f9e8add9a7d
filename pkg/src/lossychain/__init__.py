"""Simulator and verification harness for the longest-chain protocol under
0-infinity message loss."""

from .arrivals import ParameterError, SimParams, adversarial_count, generate_timeline, index_domain_counts
from .delays import DelayOracle, miner_of, observer

__version__ = "0.1.0"
