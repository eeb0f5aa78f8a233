"""Doubly stochastic stopping times driven by affine cumulative hazards.

A stopping time is the first grid date at which the cumulative hazard
crosses an independent unit-exponential threshold (first crossing never
happens -> T+1).  Two times (mortality, surrender) are coupled through the
survival copula of their thresholds; conditional on the factor path the
joint survival surface is

    Gamma(t1, t2) = C(exp(-Lambda^m_{t1}), exp(-Lambda^s_{t2})).

Differencing Gamma yields the conditional atom probabilities G^{1,1},
G^{2,u}, G^{3,u}, G^{4,u,v} used throughout pricing and verification.
Atoms are keyed by event: kind "2u" is {tau_m > t, tau_s = u}, kind "3u"
is {tau_m = u, tau_s > t}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .coordinates import AffineModel
from .errors import ConfigError, DimensionError, NegativeIncrementError


@dataclass(frozen=True, eq=False)
class IntensityLoading:
    """Affine hazard loading: increment at t is b . X_t + c . Y_t.

    The implied offset b0 = -(b . X_0 + c . Y_0) makes Lambda_0 = 0, so the
    cumulative hazard is simply the sum of increments over t = 1..T.
    Entries must be nonnegative; entries attached to coordinates whose state
    space is not nonnegative must be zero (checked against a model by
    ``validate_for_model``).
    """

    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float))
        if np.any(self.b < 0) or np.any(self.c < 0):
            raise ConfigError("intensity loadings must be nonnegative")

    def b0(self, model: AffineModel) -> float:
        return -float(self.b @ model.x0 + self.c @ model.y0)

    def scaled(self, factor: float) -> "IntensityLoading":
        return IntensityLoading(self.b * factor, self.c * factor)

    @property
    def is_zero(self) -> bool:
        return not (np.any(self.b != 0) or np.any(self.c != 0))


def zero_loading(d1: int, d2: int) -> IntensityLoading:
    return IntensityLoading(np.zeros(d1), np.zeros(d2))


def validate_for_model(loading: IntensityLoading, model: AffineModel) -> None:
    if loading.b.shape != (model.d1,) or loading.c.shape != (model.d2,):
        raise DimensionError(
            f"loading dims ({loading.b.size}, {loading.c.size}) do not match model ({model.d1}, {model.d2})"
        )
    for j, coord in enumerate(model.x_coords):
        if loading.b[j] != 0 and not coord.nonnegative:
            raise ConfigError(f"loading b[{j}] attaches to a coordinate that can be negative")
    for j, coord in enumerate(model.y_coords):
        if loading.c[j] != 0 and not coord.nonnegative:
            raise ConfigError(f"loading c[{j}] attaches to a coordinate that can be negative")


@dataclass(frozen=True)
class SurvivalCopula:
    """Survival copula of the exponential thresholds.

    kinds: "independence" (C(u,v) = u*v) and "clayton"
    (C(u,v) = (u^-theta + v^-theta - 1)^(-1/theta), theta > 0).
    """

    kind: str = "independence"
    theta: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("independence", "clayton"):
            raise ConfigError(f"unknown copula kind {self.kind!r}")
        if self.kind == "clayton" and (self.theta is None or self.theta <= 0):
            raise ConfigError("clayton copula needs theta > 0")

    @property
    def is_independence(self) -> bool:
        return self.kind == "independence"

    def cdf(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.is_independence:
            return u * v
        return (u ** (-self.theta) + v ** (-self.theta) - 1.0) ** (-1.0 / self.theta)

    def sample_thresholds(self, n: int, rng: np.random.Generator):
        """Draw (E_m, E_s) pairs with the copula's joint survival structure."""
        if self.is_independence:
            return rng.exponential(size=n), rng.exponential(size=n)
        # Gamma(1/theta) frailty: U_i = (1 + E_i/W)^(-1/theta) are Clayton-coupled uniforms.
        w = rng.standard_gamma(1.0 / self.theta, size=n)
        e1 = rng.exponential(size=n)
        e2 = rng.exponential(size=n)
        return np.log1p(e1 / w) / self.theta, np.log1p(e2 / w) / self.theta


@dataclass(frozen=True, eq=False)
class HazardPath:
    """Cumulative hazard on the grid, Lambda_0 = 0, nondecreasing."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.ndim != 1:
            raise DimensionError("hazard path must be one-dimensional")
        if self.values[0] != 0.0:
            raise NegativeIncrementError(f"hazard path must start at 0, got {self.values[0]}")
        if np.any(np.diff(self.values) < 0):
            raise NegativeIncrementError("hazard path has a negative increment")

    @property
    def horizon(self) -> int:
        return self.values.size - 1

    def at(self, t: int) -> float:
        """Lambda_t with the convention Lambda_t = 0 for t < 0."""
        return 0.0 if t < 0 else float(self.values[t])


def hazard_increments(z_paths: np.ndarray, loading: IntensityLoading) -> np.ndarray:
    d1 = loading.b.size
    return z_paths[..., :d1] @ loading.b + z_paths[..., d1:] @ loading.c


def cum_hazard_values(z_paths: np.ndarray, loading: IntensityLoading) -> np.ndarray:
    """Cumulative hazards for paths of shape (..., T+1, d1+d2) -> (..., T+1)."""
    inc = hazard_increments(z_paths, loading)
    if np.any(inc < 0):
        raise NegativeIncrementError("negative hazard increment along a path")
    out = np.cumsum(inc, axis=-1)
    out -= out[..., :1]  # Lambda_0 = 0; drops the time-0 increment
    return out


def cum_hazard(z_path: np.ndarray, loading: IntensityLoading) -> HazardPath:
    """Hazard path for a single state path of shape (T+1, d1+d2)."""
    return HazardPath(cum_hazard_values(np.asarray(z_path, dtype=float), loading))


def gamma_surface(t1: int, t2: int, l_m: HazardPath, l_s: HazardPath, copula: SurvivalCopula) -> float:
    """Joint conditional survival Gamma(t1, t2); index -1 means certain survival."""
    lm, ls = l_m.at(t1), l_s.at(t2)
    if copula.is_independence:
        return float(np.exp(-(lm + ls)))
    return float(copula.cdf(np.exp(-lm), np.exp(-ls)))


def atom_prob(kind: str, t: int, u: Optional[int], v: Optional[int],
              l_m: HazardPath, l_s: HazardPath, copula: SurvivalCopula) -> float:
    """Conditional atom probability given the factor path.

    kind "11":  {tau_m > t, tau_s > t}
    kind "2u":  {tau_m > t, tau_s = u},   1 <= u <= t
    kind "3u":  {tau_m = u, tau_s > t},   1 <= u <= t
    kind "4uv": {tau_m = u, tau_s = v},   1 <= u, v <= t
    """
    horizon = min(l_m.horizon, l_s.horizon)
    if not 0 <= t <= horizon:
        raise IndexError(f"t={t} outside 0..{horizon}")

    def g(a, b):
        return gamma_surface(a, b, l_m, l_s, copula)

    if kind == "11":
        return g(t, t)
    if kind == "2u":
        if u is None or not 1 <= u <= t:
            raise IndexError(f"kind 2u needs 1 <= u <= t, got u={u}, t={t}")
        return g(t, u - 1) - g(t, u)
    if kind == "3u":
        if u is None or not 1 <= u <= t:
            raise IndexError(f"kind 3u needs 1 <= u <= t, got u={u}, t={t}")
        return g(u - 1, t) - g(u, t)
    if kind == "4uv":
        if u is None or v is None or not (1 <= u <= t and 1 <= v <= t):
            raise IndexError(f"kind 4uv needs 1 <= u,v <= t, got u={u}, v={v}, t={t}")
        return g(u - 1, v - 1) - g(u, v - 1) - g(u - 1, v) + g(u, v)
    raise ValueError(f"unknown atom kind {kind!r}")


def _first_crossing(values: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    # values (n, T+1), thresholds (n,) -> first t in 1..T with Lambda_t >= E, else T+1
    hit = values[:, 1:] >= thresholds[:, None]
    any_hit = hit.any(axis=1)
    first = hit.argmax(axis=1) + 1
    return np.where(any_hit, first, values.shape[1])


def sample_times_batch(lm_values: np.ndarray, ls_values: np.ndarray,
                       copula: SurvivalCopula, rng: np.random.Generator):
    """Vectorized (tau_m, tau_s) draws for hazard value arrays (n, T+1)."""
    n = lm_values.shape[0]
    e_m, e_s = copula.sample_thresholds(n, rng)
    return _first_crossing(lm_values, e_m), _first_crossing(ls_values, e_s)


def sample_times(l_m: HazardPath, l_s: HazardPath, copula: SurvivalCopula, rng: np.random.Generator):
    """Draw one (tau_m, tau_s) pair; values in {1..T, T+1} with T+1 = never."""
    tm, ts = sample_times_batch(l_m.values[None, :], l_s.values[None, :], copula, rng)
    return int(tm[0]), int(ts[0])


def single_time_payoff_formula(payments: np.ndarray, l: HazardPath, t: int) -> float:
    """Conditional value of A_tau 1{tau > t} for an adapted stream along one path.

    payments is indexed 0..T; only entries t+1..T enter:
        e^{Lambda_t} * sum_{s=t+1}^{T} A_s (e^{-Lambda_{s-1}} - e^{-Lambda_s}).
    Used as a per-path oracle for the single-time enlargement formula.
    """
    payments = np.asarray(payments, dtype=float)
    horizon = l.horizon
    if t >= horizon:
        raise IndexError(f"need t < T, got t={t}, T={horizon}")
    surv = np.exp(-l.values)
    s = np.arange(t + 1, horizon + 1)
    return float(np.exp(l.values[t]) * np.sum(payments[s] * (surv[s - 1] - surv[s])))


def two_time_payoff_formula(payments_m: np.ndarray, payments_s: np.ndarray,
                            l_m: HazardPath, l_s: HazardPath,
                            copula: SurvivalCopula, t: int) -> float:
    """Conditional value, on {tau_m > t, tau_s > t}, of the two-stream payoff

        1{tau_m < T, tau_m < tau_s} A^m_{tau_m} + 1{tau_s < T, tau_s <= tau_m} A^s_{tau_s}

    for one factor path:  (G^{1,1}_t)^{-1} sum_{u=t+1}^{T-1}
    [A^m_u * G^{3,u}_u + A^s_u * G^{2,u}_{u-1}].  The tie tau_s = tau_m pays
    the surrender stream here, exactly as in the decomposition it verifies.
    """
    payments_m = np.asarray(payments_m, dtype=float)
    payments_s = np.asarray(payments_s, dtype=float)
    horizon = min(l_m.horizon, l_s.horizon)
    g11 = gamma_surface(t, t, l_m, l_s, copula)
    total = 0.0
    for u in range(t + 1, horizon):
        g3 = gamma_surface(u - 1, u, l_m, l_s, copula) - gamma_surface(u, u, l_m, l_s, copula)
        g2 = gamma_surface(u - 1, u - 1, l_m, l_s, copula) - gamma_surface(u - 1, u, l_m, l_s, copula)
        total += payments_m[u] * g3 + payments_s[u] * g2
    return total / g11


@dataclass(frozen=True)
class HazardLoadings:
    """Mortality and surrender loadings plus their threshold copula."""

    mortality: IntensityLoading
    surrender: IntensityLoading
    copula: SurvivalCopula = SurvivalCopula()

    def validate_for_model(self, model: AffineModel) -> None:
        validate_for_model(self.mortality, model)
        validate_for_model(self.surrender, model)

    def scaled(self, mortality_factor: float = 1.0, surrender_factor: float = 1.0) -> "HazardLoadings":
        return HazardLoadings(
            self.mortality.scaled(mortality_factor),
            self.surrender.scaled(surrender_factor),
            self.copula,
        )


def loadings_from_dict(cfg: dict) -> HazardLoadings:
    for key in ("mortality", "surrender"):
        if key not in cfg:
            raise ConfigError(f"loadings config: missing field {key!r}")
        for sub in ("b", "c"):
            if sub not in cfg[key]:
                raise ConfigError(f"loadings config: {key} is missing field {sub!r}")
    cop_cfg = cfg.get("copula", {"kind": "independence"})
    copula = SurvivalCopula(kind=cop_cfg.get("kind", "independence"), theta=cop_cfg.get("theta"))
    return HazardLoadings(
        mortality=IntensityLoading(np.asarray(cfg["mortality"]["b"], float), np.asarray(cfg["mortality"]["c"], float)),
        surrender=IntensityLoading(np.asarray(cfg["surrender"]["b"], float), np.asarray(cfg["surrender"]["c"], float)),
        copula=copula,
    )


def load_loadings(path) -> HazardLoadings:
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"loadings config {path}: invalid JSON ({e})") from None
    return loadings_from_dict(cfg)
