"""Distributed robust exact differentiation of averaged signals over
undirected communication graphs, with event-triggered links and numerically
certified gains."""

from .gains import CertifiedConstants, GainSet, certify
from .graph import Graph, complete, path, ring
from .signals import SignalBank, reference_bank
from .sim import SimConfig, Trace, integrate
from .trigger import Constant, StateDependent, Vanishing

__all__ = [
    "CertifiedConstants", "GainSet", "certify",
    "Graph", "complete", "path", "ring",
    "SignalBank", "reference_bank",
    "SimConfig", "Trace", "integrate",
    "Constant", "StateDependent", "Vanishing",
]

__version__ = "0.1.0"
