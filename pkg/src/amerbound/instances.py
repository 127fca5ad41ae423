"""Built-in demo instances with known optimal values.

Each instance bundles a call surface, the lattice payoff, the exact optimal
bound, and (where available) closed-form certificates used as test oracles
and by the CLI demo command.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import market
from .payoff import AmericanPayoffGrid


@dataclass
class DemoInstance:
    name: str
    surface: market.CallSurface
    payoff: AmericanPayoffGrid
    bound_value: float
    extras: dict = field(default_factory=dict)


def sec26(q=(0.5, 0.25, 0.25), b=(130.0, 115.0, 100.0)) -> DemoInstance:
    """Three-period put-like claim on the lattice {0, 50, 100, 150}.

    Calls: c_1 = 50, c_2 = 25 * cumulative mass, c_3 = 0; payoff column n is
    (b_n - x)+.  The optimal bound has a closed form: with n* the last n for
    which b_n - 50 > 2 (b_1 - 100), it equals
    (b_1 - 100) * sum_{n > n*} q_n + sum_{n <= n*} (q_n / 2) (b_n - 50).
    """
    q = np.asarray(q, dtype=float)
    b = np.asarray(b, dtype=float)
    N = len(q)
    if len(b) != N or abs(q.sum() - 1.0) > 1e-12 or np.any(q <= 0):
        raise ValueError("q must be a positive probability vector matching b")
    if np.any(np.diff(b) >= 0) or b[0] <= 100.0 or b[-1] < 100.0:
        raise ValueError("b must be strictly decreasing with b_1 > 100, b_N >= 100")
    Q = np.cumsum(q)
    strikes = np.array([50.0, 100.0, 150.0])
    maturities = np.arange(1.0, N + 1.0)
    calls = np.vstack([np.full(N, 50.0), 25.0 * Q, np.zeros(N)])
    surface = market.CallSurface(100.0, strikes, maturities,
                                 np.vstack([np.full(N, 100.0), calls]))
    states = surface.states
    values = np.maximum(b[None, :] - states[:, None], 0.0)
    payoff = AmericanPayoffGrid(values, states, maturities)

    nstar = max(n for n in range(1, N + 1) if b[n - 1] - 50.0 > 2.0 * (b[0] - 100.0))
    value = float((b[0] - 100.0) * q[nstar:].sum()
                  + np.sum(q[:nstar] / 2.0 * (b[:nstar] - 50.0)))

    # Closed-form hedge quintuple (one entry per lattice state and maturity).
    V = np.zeros((4, N))
    V[0] = np.maximum(b, 3.0 * (b[0] - 100.0))
    V[1] = np.where(np.arange(1, N + 1) <= nstar, b - 50.0, 2.0 * (b[0] - 100.0))
    V[2] = b[0] - 100.0
    V[3] = 0.0
    E1 = np.zeros((4, N))
    E1[:, :N - 1] = V[:, :N - 1] - V[:, 1:]
    E2 = np.zeros((4, N))
    D1 = np.zeros((4, N - 1))
    D2 = np.zeros((4, N - 1))
    D2[:3, :] = (V[:3, 1:] - V[1:, 1:]) / 50.0
    extras = {"nstar": nstar, "q": q, "b": b,
              "hedge": {"E1": E1, "E2": E2, "D1": D1, "D2": D2, "V": V}}
    return DemoInstance("sec26", surface, payoff, value, extras)


def sec52() -> DemoInstance:
    """Two-period instance on states {0,1,2,3,4} where the bound (18/5) beats
    every model driven by the price path alone (best 7/2)."""
    states = [0.0, 1.0, 2.0, 3.0, 4.0]
    marginals = [[0.0, 0.4], [0.5, 0.0], [0.0, 0.2], [0.5, 0.0], [0.0, 0.4]]
    surface = market.load_surface({
        "marginals": marginals, "states": states, "maturities": [1.0, 2.0],
        "s0": 2.0,
    })
    values = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0],
                       [0.0, 0.0], [0.0, 8.0]])
    payoff = AmericanPayoffGrid(values, surface.states, surface.maturities)
    hedge = {
        "E1": np.array([[0.0, 0], [1, 0], [2, 0], [3, 0], [4, 0]], dtype=float),
        "E2": np.array([[0, 0.0], [0, 0], [0, 0], [0, -2], [0, -4]], dtype=float),
        "D1": np.ones((5, 1)),
        "D2": np.array([[0.0], [0.0], [0.0], [-2.0], [-2.0]]),
        "V": np.array([[0, 0], [1, 0], [2, 0], [5, 4], [8, 8]], dtype=float),
    }
    extras = {"hedge": hedge, "path_model_best": 3.5}
    return DemoInstance("sec52", surface, payoff, 3.6, extras)


def eg11() -> DemoInstance:
    """Two-period claim on {0, 50, 100, 150}: the bound is 34 while the
    canonical single-switch model prices the claim at 32."""
    third = 1.0 / 3.0
    surface = market.load_surface({
        "marginals": [[0.0, 0.0], [0.0, third], [1.0, third], [0.0, third]],
        "states": [0.0, 50.0, 100.0, 150.0], "maturities": [1.0, 2.0],
        "s0": 100.0,
    })
    values = np.array([[132.0, 120.0], [82.0, 70.0],
                       [32.0, 20.0], [0.0, 0.0]])
    payoff = AmericanPayoffGrid(values, surface.states, surface.maturities)
    return DemoInstance("eg11", surface, payoff, 34.0,
                        {"seed_model_price": 32.0})


BUILTIN = {"sec26": sec26, "sec52": sec52, "eg11": eg11}


def get(name, **kwargs) -> DemoInstance:
    try:
        return BUILTIN[name](**kwargs)
    except KeyError:
        raise ValueError("unknown demo instance %r" % name)
