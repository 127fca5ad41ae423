"""Model-free upper bounds for American claims from European call prices.

The package computes the tight upper bound on the price of an American-style
claim implied by a finite grid of European call quotes, and produces two
independently verifiable certificates: the extremal price/regime martingale
model attaining the bound, and the cheapest semi-static super-replicating
hedge with the same cost.
"""

__version__ = "0.1.0"
