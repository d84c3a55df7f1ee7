"""Shared fixtures: the reference experiment (ring of five agents, unit
sinusoid inputs, gains k0=4, k1=13, gamma=1, L=4) and its simulation traces.
Expensive runs are session-scoped so every test file reuses them.
"""
import numpy as np
import pytest

from netdiff.gains import GainSet, OptimizerSettings
from netdiff.graph import ring
from netdiff.signals import reference_bank
from netdiff.sim import SimConfig, integrate
from netdiff.trigger import Constant, StateDependent, Vanishing


@pytest.fixture(scope="session")
def ring5():
    return ring(5)


@pytest.fixture(scope="session")
def bank():
    return reference_bank()


@pytest.fixture(scope="session")
def paper_gains():
    return GainSet(4.0, 13.0, 1.0, 4.0)


@pytest.fixture(scope="session")
def cert_opts():
    # reduced multi-start budget: enough for reproducible sup/inf values on
    # the 8-dimensional ring(5) problem, fast enough for the test suite
    return OptimizerSettings(seed=0, n_starts=16, n_presamples=256, maxfev=300)


@pytest.fixture(scope="session")
def ideal_trace(ring5, bank, paper_gains):
    return integrate(ring5, bank, paper_gains, SimConfig(seed=0))


@pytest.fixture(scope="session")
def const_trace(ring5, bank, paper_gains):
    return integrate(ring5, bank, paper_gains, SimConfig(seed=0), Constant(0.02))


@pytest.fixture(scope="session")
def vanish_trace(ring5, bank, paper_gains):
    return integrate(ring5, bank, paper_gains, SimConfig(seed=0), Vanishing(0.02, 0.5))


@pytest.fixture(scope="session")
def state_trace(ring5, bank, paper_gains):
    return integrate(ring5, bank, paper_gains, SimConfig(seed=0),
                     StateDependent(0.02, 0.15))


def gaps_in_window(trace, lo, hi):
    """Pooled inter-event gaps for events inside [lo, hi)."""
    out = []
    for ts in trace.event_times:
        ts = np.asarray(ts)
        sel = ts[(ts >= lo) & (ts < hi)]
        if len(sel) > 1:
            out.extend(np.diff(sel))
    return np.array(out)
