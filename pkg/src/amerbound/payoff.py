"""American payoff functions and their lattice discretizations.

A payoff is a function A(x, t) of price and exercise time, flagged with the
structural properties the bound machinery relies on: convexity in price,
monotone decay in time, and the asymptotic growth rate per unit of price.
The lattice form stores one column per maturity over the state grid
(strike 0 plus the traded strikes).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np


class PayoffError(Exception):
    pass


@dataclass
class PayoffFunction:
    """A(x, t) with declared structure, sanity-checked by sampling.

    ``tail_slope`` is (an upper bound on) lim A(x, t)/x as x grows, uniform
    over t in [0, horizon].  ``x_hint`` bounds the price range used for the
    sampling checks.
    """

    fn: object
    convex_in_x: bool = False
    decreasing_in_t: bool = False
    tail_slope: float = 0.0
    horizon: float = 1.0
    x_hint: float = 200.0

    def __post_init__(self):
        if self.tail_slope < 0 or self.horizon <= 0 or self.x_hint <= 0:
            raise PayoffError("tail_slope must be >= 0 and horizon/x_hint > 0")
        self._sampling_check()

    def __call__(self, x, t):
        return self.fn(x, t)

    def _sampling_check(self, samples=1000, tol=1e-9):
        rng = np.random.default_rng(1234567891)
        xs = rng.uniform(0.0, self.x_hint, size=samples)
        ts = rng.uniform(0.0, self.horizon, size=samples)
        vals = np.array([float(self.fn(x, t)) for x, t in zip(xs, ts)])
        if np.any(~np.isfinite(vals)) or np.any(vals < -tol):
            raise PayoffError("payoff must be finite and nonnegative")
        if self.convex_in_x:
            lam = rng.uniform(0.0, 1.0, size=samples)
            x2 = rng.uniform(0.0, self.x_hint, size=samples)
            mid = lam * xs + (1 - lam) * x2
            for i in range(samples):
                chord = lam[i] * vals[i] + (1 - lam[i]) * self.fn(x2[i], ts[i])
                if self.fn(mid[i], ts[i]) > chord + tol * (1 + abs(chord)):
                    raise PayoffError("convex_in_x contradicted by sampling")
        if self.decreasing_in_t:
            t2 = rng.uniform(0.0, self.horizon, size=samples)
            lo, hi = np.minimum(ts, t2), np.maximum(ts, t2)
            for i in range(samples):
                a, b = self.fn(xs[i], lo[i]), self.fn(xs[i], hi[i])
                if b > a + tol * (1 + abs(a)):
                    raise PayoffError("decreasing_in_t contradicted by sampling")
        # tail slope: secants over the sampled range must not exceed it...
        # only checkable when the declared slope is 0 and values stay bounded;
        # otherwise trust the declaration (growth shows up far beyond x_hint).

    def right_slope(self, x, t, h=None):
        """Right derivative in price by a tiny forward difference."""
        h = h or 1e-7 * (1 + abs(x))
        return (self.fn(x + h, t) - self.fn(x, t)) / h


@dataclass
class AmericanPayoffGrid:
    """Payoff values on the lattice: values[j, n] at state x_j, maturity t_n.

    ``tail_slopes[n]`` is the growth rate of the column beyond the top state;
    ``growth_rate`` is their common upper bound used by the hedging layer.
    """

    values: np.ndarray               # (J+1) x N over [0] + strikes
    states: np.ndarray               # (J+1,) first entry 0
    maturities: np.ndarray           # (N,)
    tail_slopes: np.ndarray = None   # (N,)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        self.maturities = np.asarray(self.maturities, dtype=float)
        if self.states[0] != 0.0 or np.any(np.diff(self.states) <= 0):
            raise PayoffError("states must start at 0 and increase")
        if self.values.shape != (len(self.states), len(self.maturities)):
            raise PayoffError("values must be (num states) x (num maturities)")
        if self.tail_slopes is None:
            self.tail_slopes = np.zeros(len(self.maturities))
        else:
            self.tail_slopes = np.asarray(self.tail_slopes, dtype=float)
        if np.any(self.tail_slopes < 0):
            raise PayoffError("tail slopes must be nonnegative")
        if np.any(self.values < 0):
            worst = float(self.values.min())
            if worst < -1e-9:
                raise PayoffError("negative payoff value %.3e on lattice" % worst)
            warnings.warn("clipping tiny negative payoff values to 0")
            self.values = np.maximum(self.values, 0.0)

    @property
    def growth_rate(self):
        return float(np.max(self.tail_slopes))

    def column(self, n):
        return self.values[:, n]

    def interp(self, x, n):
        """Extended linear interpolation of column n at price(s) x."""
        x = np.asarray(x, dtype=float)
        top = self.states[-1]
        inside = np.interp(np.minimum(x, top), self.states, self.values[:, n])
        return inside + self.tail_slopes[n] * np.maximum(x - top, 0.0)

    def right_subgradient(self, x, n):
        """Exact right slope of the piecewise-linear column n at price(s) x."""
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        j = np.clip(np.searchsorted(self.states, x, side="right") - 1,
                    0, len(self.states) - 2)
        seg = ((self.values[j + 1, n] - self.values[j, n])
               / (self.states[j + 1] - self.states[j]))
        out = np.where(x >= self.states[-1], self.tail_slopes[n], seg)
        return float(out[0]) if scalar else out


def discounted_put(strike, rate, horizon=None, x_hint=None) -> PayoffFunction:
    """A(x, t) = (K exp(-r t) - x)+ stated on the discounted price x."""
    K, r = float(strike), float(rate)
    if K <= 0 or r < 0:
        raise PayoffError("strike must be positive and rate nonnegative")
    horizon = horizon if horizon is not None else 1.0
    x_hint = x_hint if x_hint is not None else 4.0 * K

    def fn(x, t):
        return np.maximum(K * np.exp(-r * t) - x, 0.0)

    return PayoffFunction(fn, convex_in_x=True, decreasing_in_t=True,
                          tail_slope=0.0, horizon=horizon, x_hint=x_hint)


def grid_payoff(payoff: PayoffFunction, strikes, maturities) -> AmericanPayoffGrid:
    """Evaluate the payoff on the lattice [0] + strikes at each maturity."""
    states = np.concatenate([[0.0], np.asarray(strikes, dtype=float)])
    maturities = np.asarray(maturities, dtype=float)
    vals = np.array([[float(payoff(x, t)) for t in maturities] for x in states])
    slopes = np.full(len(maturities), float(payoff.tail_slope))
    return AmericanPayoffGrid(vals, states, maturities, slopes)


def linearize(payoff: PayoffFunction, strikes, maturities) -> PayoffFunction:
    """Piecewise-linear-in-price, piecewise-constant-in-time surrogate.

    The surrogate interpolates the node values f(x_j, t_n) linearly in price
    and holds them constant on each maturity interval [t_n, t_{n+1}), so an
    evaluation at time t uses the latest maturity at or before t (the first
    maturity before t_1).  Beyond the top strike each column extends with its
    last segment's slope, clipped to [0, tail_slope], and the whole surface
    is floored at 0.  Node values are reproduced exactly.
    """
    grid = grid_payoff(payoff, strikes, maturities)
    maturities = grid.maturities
    ext = np.clip((grid.values[-1, :] - grid.values[-2, :])
                  / (grid.states[-1] - grid.states[-2]),
                  0.0, payoff.tail_slope)
    surrogate = AmericanPayoffGrid(grid.values, grid.states, maturities, ext)

    def fn(x, t):
        n = int(np.searchsorted(maturities, t, side="right")) - 1
        n = max(n, 0)
        return np.maximum(surrogate.interp(x, n), 0.0)

    return PayoffFunction(fn, convex_in_x=payoff.convex_in_x,
                          decreasing_in_t=payoff.decreasing_in_t,
                          tail_slope=float(np.max(ext)),
                          horizon=payoff.horizon, x_hint=payoff.x_hint)


def exercise_time_transform(payoff: PayoffFunction, strikes,
                            maturities) -> AmericanPayoffGrid:
    """Lattice form evaluated at interval starts in time.

    Column k holds A(x_j, t_{k-1}) with t_0 = 0: an agent exercising during
    (t_{k-1}, t_k] is paid what the claim was worth when the interval opened,
    so the lattice value dominates any payoff that decays in time.  This is
    the grid whose bound covers exercise at arbitrary times.
    """
    if not payoff.decreasing_in_t:
        raise PayoffError("interval-start transform needs decreasing_in_t")
    maturities = np.asarray(maturities, dtype=float)
    starts = np.concatenate([[0.0], maturities[:-1]])
    states = np.concatenate([[0.0], np.asarray(strikes, dtype=float)])
    vals = np.array([[float(payoff(x, t)) for t in starts] for x in states])
    slopes = np.full(len(maturities), float(payoff.tail_slope))
    return AmericanPayoffGrid(vals, states, maturities, slopes)
