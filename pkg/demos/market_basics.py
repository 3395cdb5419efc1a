"""Walkthrough of the market mechanics on a small two-state example.

Prices clear at the wealth-weighted average investment, wealth flows to
whoever priced the realized state best, and the regret ledger ties the
final wealth split to the agents' regret difference exactly.
"""

import numpy as np

from marketsel import (
    AgentSpec,
    MarketConfig,
    build_ledger,
    clearing_prices,
    relative_entropy,
    run_market,
    update_wealths,
)

# One round by hand: two agents with equal wealth.
strategies = np.array([[0.8, 0.2], [0.6, 0.4]])
wealths = np.array([0.5, 0.5])
prices = clearing_prices(strategies, wealths)
print("strategies:", strategies.tolist())
print("clearing prices:", prices)
print("state 0 occurs ->", update_wealths(strategies, wealths, prices, 0))
print("state 1 occurs ->", update_wealths(strategies, wealths, prices, 1))

# A full run: the true distribution is (0.7, 0.3).  Agent 0 knows it;
# agent 1 plays a coin flip and pays relative entropy per step for it.
config = MarketConfig(
    n_states=2,
    horizon=20_000,
    delta=0.1,
    q=[0.7, 0.3],
    seed=7,
    agents=[
        AgentSpec(kind="fixed", alpha=[0.7, 0.3]),
        AgentSpec(kind="fixed", alpha=[0.5, 0.5]),
    ],
)
record = run_market(config)
ledger = build_ledger(record)

gap = relative_entropy([0.7, 0.3], [0.5, 0.5])
print(f"\nper-step divergence of the coin flipper: {gap:.5f} nats")
print(f"terminal wealths: {record.terminal_wealths().round(6)}")
print(f"regrets: {ledger.regrets.round(2)} (difference ~ T * divergence = {20_000 * gap:.0f})")
print(f"identity residual: {np.abs(ledger.identity_residuals()).max():.2e}")

# Determinism: same config, same trace, byte for byte.
again = run_market(config)
print("replay byte-identical:", record.to_csv() == again.to_csv())
