import datetime

import numpy as np
import pytest

from mapvol.models import ModelKind
from mapvol.panel import PanelSeries
from mapvol.simulation import SimScenario, simulate_panel


def make_panel(rv, ret=None, x=None, delta=None, start=datetime.date(2015, 1, 1)):
    """Small hand-built panel; defaults: positive returns, x=0.2, no announcements."""
    rv = np.asarray(rv, dtype=float)
    T = rv.size
    dates = tuple(start + datetime.timedelta(days=i) for i in range(T))
    return PanelSeries(
        dates=dates,
        rv=rv,
        ret=np.asarray(ret, dtype=float) if ret is not None else np.ones(T),
        x=np.asarray(x, dtype=float) if x is not None else np.full(T, 0.2),
        delta=np.asarray(delta, dtype=float) if delta is not None else np.zeros(T),
    )


@pytest.fixture(scope="session")
def map_sim():
    """One medium MAP panel shared by tests that only need realistic data."""
    return simulate_panel(SimScenario(kind=ModelKind.MAP, T=1200, seed=42))


@pytest.fixture(scope="session")
def amem_sim():
    return simulate_panel(SimScenario(kind=ModelKind.AMEM, T=1200, seed=43))


def random_stationary_params(kind, rng, max_persistence=0.97):
    """Random parameter draw satisfying every constraint of the kind."""
    from mapvol.models import ParamSet

    persistence = rng.uniform(0.80, max_persistence)
    weights = rng.dirichlet([2.0, 8.0, 1.0])  # alpha, beta, gamma/2 shares
    alpha, beta, half_gamma = persistence * weights
    policy = kind.uses_policy
    return ParamSet(
        omega=rng.uniform(0.2, 2.0),
        alpha=float(alpha), beta=float(beta), gamma=float(2 * half_gamma),
        delta=float(rng.uniform(-1.5, -0.1)) if policy else 0.0,
        phi=float(rng.uniform(0.1, 1.5)) if policy else 0.0,
        psi=float(rng.uniform(0.05, 0.9) * beta) if kind.has_policy_state else 0.0,
        theta=float(rng.uniform(2.0, 15.0)),
    )
