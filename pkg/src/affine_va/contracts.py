"""Variable-annuity contract data and the pure functions on it.

A contract collects the payment grid T_1 < ... < T_n < T, the payment
amounts, the guarantee accumulation rate, the surrender-penalty schedule
and a deterministic discount curve given by per-period factors.  Death in
(T_{k-1}, T_k] and surrender decisions in (T_{k-1}, T_k] both settle at
T_k (with T_{n+1} = T).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .errors import ConfigError, NonpositivePriceError


@dataclass(frozen=True, eq=False)
class VAContract:
    grid: tuple            # payment/surrender dates T_1 < ... < T_n, within {1..T-1}
    payments: tuple        # pi_1..pi_n, all > 0
    delta: float           # guarantee rate per period (may be -inf: zero guarantee)
    penalty: Mapping       # grid date -> surrender penalty in (0, 1]
    maturity: int          # T
    discount_factors: tuple  # per-period factors, length T; beta(0,t) = prod of first t
    payment_at_zero: float = 0.0  # pi_0, enters the premium leg only

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(int(t) for t in self.grid))
        object.__setattr__(self, "payments", tuple(float(p) for p in self.payments))
        object.__setattr__(self, "penalty", {int(k): float(v) for k, v in dict(self.penalty).items()})
        object.__setattr__(self, "discount_factors", tuple(float(f) for f in self.discount_factors))
        T = self.maturity
        if len(self.grid) != len(self.payments):
            raise ConfigError("grid and payments must have the same length")
        if not self.grid:
            raise ConfigError("contract needs at least one payment date")
        if any(t2 <= t1 for t1, t2 in zip(self.grid, self.grid[1:])):
            raise ConfigError("grid dates must be strictly increasing")
        if self.grid[0] < 1 or self.grid[-1] >= T:
            raise ConfigError(f"grid dates must lie in 1..{T - 1}")
        if any(p <= 0 for p in self.payments):
            raise ConfigError("payments must be positive")
        if self.payment_at_zero < 0:
            raise ConfigError("payment_at_zero must be >= 0")
        if set(self.penalty) != set(self.grid):
            raise ConfigError("penalty schedule must cover exactly the grid dates")
        if any(not 0 < v <= 1 for v in self.penalty.values()):
            raise ConfigError("penalties must lie in (0, 1]")
        if len(self.discount_factors) != T:
            raise ConfigError(f"need {T} per-period discount factors, got {len(self.discount_factors)}")
        if any(f <= 0 for f in self.discount_factors):
            raise ConfigError("discount factors must be positive")

    @property
    def n(self) -> int:
        return len(self.grid)

    def beta(self, t1: int, t2: int) -> float:
        """Discount factor beta(t1, t2) = prod of per-period factors over (t1, t2]."""
        if not 0 <= t1 <= t2 <= self.maturity:
            raise IndexError(f"need 0 <= t1 <= t2 <= {self.maturity}")
        return float(np.prod(self.discount_factors[t1:t2])) if t2 > t1 else 1.0

    def with_delta(self, delta: float) -> "VAContract":
        return replace(self, delta=delta)

    def with_penalty_scale(self, scale: float) -> "VAContract":
        scaled = {k: min(1.0, v * scale) for k, v in self.penalty.items()}
        if any(v <= 0 for v in scaled.values()):
            raise ConfigError("penalty scale drove a penalty to 0")
        return replace(self, penalty=scaled)


def guarantee_value(contract: VAContract, t: int) -> float:
    """Accumulated guarantee K^pi_t = sum_{T_i <= t} e^{delta (t - T_i)} pi_i."""
    if not 0 <= t <= contract.maturity:
        raise IndexError(f"t={t} outside 0..{contract.maturity}")
    total = 0.0
    for ti, pi in zip(contract.grid, contract.payments):
        if ti <= t:
            # exp(delta * 0) = 1 even for delta = -inf (zero-guarantee limit)
            total += pi if t == ti else pi * math.exp(contract.delta * (t - ti))
    return total


def fund_value(contract: VAContract, s_path: np.ndarray, t: int) -> float:
    """Fund value F^pi_t = (sum_{T_i <= t} pi_i / S_{T_i}) * S_t."""
    return float(fund_values(contract, np.asarray(s_path, dtype=float)[None, :], t)[0])


def fund_values(contract: VAContract, s_paths: np.ndarray, t: int) -> np.ndarray:
    """Vectorized fund value for price paths of shape (n, >=t+1)."""
    if not 0 <= t < s_paths.shape[-1]:
        raise IndexError(f"price path does not cover t={t}")
    dates = [ti for ti in contract.grid if ti <= t]
    needed = s_paths[..., dates + [t]] if dates else s_paths[..., [t]]
    if np.any(needed <= 0):
        raise NonpositivePriceError("fund accounting needs strictly positive prices")
    units = np.zeros(s_paths.shape[:-1])
    for ti, pi in zip(contract.grid, contract.payments):
        if ti <= t:
            units += pi / s_paths[..., ti]
    return units * s_paths[..., t]


def settle_date(contract: VAContract, t: int) -> int:
    """Smallest element of grid plus maturity that is >= t."""
    if not 1 <= t <= contract.maturity:
        raise IndexError(f"t={t} outside 1..{contract.maturity}")
    for ti in contract.grid:
        if ti >= t:
            return ti
    return contract.maturity


def contract_from_dict(cfg: dict) -> VAContract:
    for key in ("grid", "payments", "delta", "penalty", "maturity", "discount_factors"):
        if key not in cfg:
            raise ConfigError(f"contract config: missing field {key!r}")
    return VAContract(
        grid=tuple(cfg["grid"]),
        payments=tuple(cfg["payments"]),
        delta=float(cfg["delta"]),
        penalty={int(k): float(v) for k, v in cfg["penalty"].items()},
        maturity=int(cfg["maturity"]),
        discount_factors=tuple(cfg["discount_factors"]),
        payment_at_zero=float(cfg.get("payment_at_zero", 0.0)),
    )


def load_contract(path) -> VAContract:
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"contract config {path}: invalid JSON ({e})") from None
    return contract_from_dict(cfg)
