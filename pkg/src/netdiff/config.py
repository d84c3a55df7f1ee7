"""Experiment configuration: one JSON document describing a full run."""
from __future__ import annotations

import json
from dataclasses import dataclass

from .gains import GainSet
from .graph import Graph, parse_graph_spec
from .signals import SignalBank, reference_bank
from .sim import SimConfig
from .trigger import rule_from_dict


@dataclass
class ExperimentConfig:
    graph: Graph
    bank: SignalBank
    gains: GainSet | None          # None = certify/choose automatically
    rule: object | None            # None = ideal communication
    sim: SimConfig

    def to_dict(self) -> dict:
        return {
            "graph": self.graph.to_dict(),
            "signals": self.bank.to_dict(),
            "gains": None if self.gains is None else self.gains.to_dict(),
            "trigger": None if self.rule is None else self.rule.to_dict(),
            "sim": self.sim.to_dict(),
        }

    @staticmethod
    def from_dict(d: dict) -> "ExperimentConfig":
        graph = (parse_graph_spec(d["graph"]) if isinstance(d["graph"], str)
                 else Graph.from_dict(d["graph"]))
        bank = (SignalBank.from_dict(d["signals"]) if d.get("signals")
                else reference_bank())
        gains = GainSet.from_dict(d["gains"]) if d.get("gains") else None
        rule = rule_from_dict(d["trigger"]) if d.get("trigger") else None
        sim = SimConfig(**d.get("sim", {}))
        return ExperimentConfig(graph, bank, gains, rule, sim)

    def save(self, path: str):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    @staticmethod
    def load(path: str) -> "ExperimentConfig":
        with open(path) as f:
            return ExperimentConfig.from_dict(json.load(f))
