"""Discrete-time affine driving process Z = (X, Y).

Y collects the market factors; its one-step law under the risk-neutral
measure has a log-linear moment generating function,

    E_Q[exp(u . Y_{t+1}) | Y_t] = exp(A_Q(u) + B_Q(u) . Y_t).

X collects the insurance factors; conditional on (Y_t, X_{t-1}) its
one-step law under the statistical measure satisfies

    E_P[exp(u . X_t) | Y_t, X_{t-1}] = exp(alpha(u) + beta(u) . X_{t-1}
                                           + gamma(u) . Y_t).

Three coordinate families are provided:

* ``gaussian_ar1``        -- Gaussian AR(1); entire complex domain;
                             drives the (log) stock.
* ``autoregressive_gamma``-- nonnegative noncentral-gamma autoregression;
                             drives hazards; optional loading on a
                             nonnegative Y coordinate gives gamma(u) = eta*u.
* ``constant_one``        -- point mass at 1; carries deterministic
                             baseline hazard through the affine loadings.

Coordinates are conditionally independent across slots, so model-level
coefficients are sums of per-coordinate contributions.  All coefficient
functions accept scalars or numpy arrays of complex arguments and are pure;
sampling requires a caller-provided ``numpy.random.Generator`` per stream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import ConfigError, DimensionError, DomainError

ComplexLike = Union[complex, float, np.ndarray]

# Margin subtracted from ARG domain bounds when reporting diagnostics.
_DOMAIN_EPS = 0.0


@dataclass(frozen=True)
class GaussianAR1:
    """AR(1) coordinate: next = mu + rho * prev + sigma * N(0,1)."""

    mu: float
    rho: float
    sigma: float
    kind: str = field(default="gaussian_ar1", init=False)
    nonnegative: bool = field(default=False, init=False)

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigError(f"gaussian_ar1 volatility must be >= 0, got {self.sigma}")

    def log_mgf(self, u: ComplexLike):
        """Return (constant, lag coefficient) of the one-step log-MGF."""
        return self.mu * u + 0.5 * self.sigma**2 * u * u, self.rho * u

    def domain_bound(self) -> float:
        return np.inf

    def sample_own(self, prev: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return self.mu + self.rho * prev + self.sigma * rng.standard_normal(prev.shape)

    def in_state_space(self, x) -> bool:
        return bool(np.all(np.isfinite(x)))


@dataclass(frozen=True)
class AutoregressiveGamma:
    """Noncentral-gamma autoregression on the nonnegative half-line.

    One step draws N ~ Poisson(rho_x * prev / eps) and then
    eps * Gamma(k + N).  The log-MGF is

        -k * log(1 - eps*u) + rho_x * u / (1 - eps*u) * prev,

    defined for Re(u) < 1/eps.  An optional loading adds eta * Y to the
    value, contributing gamma(u) = eta * u in the slot ``y_index``.
    """

    k: float
    eps: float
    rho_x: float = 0.0
    eta: float = 0.0
    y_index: int | None = None

    kind: str = field(default="autoregressive_gamma", init=False)
    nonnegative: bool = field(default=True, init=False)

    def __post_init__(self):
        if self.k <= 0 or self.eps <= 0:
            raise ConfigError(f"autoregressive_gamma needs k > 0 and eps > 0, got k={self.k}, eps={self.eps}")
        if self.rho_x < 0:
            raise ConfigError(f"autoregressive_gamma persistence must be >= 0, got {self.rho_x}")
        if self.eta < 0:
            raise ConfigError(f"y_loading must be >= 0, got {self.eta}")
        if self.eta > 0 and self.y_index is None:
            raise ConfigError("y_loading requires y_index")

    def log_mgf(self, u: ComplexLike):
        u = np.asarray(u)
        if np.any(np.real(u) >= 1.0 / self.eps - _DOMAIN_EPS):
            raise DomainError(
                f"autoregressive_gamma argument outside the strip Re(u) < {1.0 / self.eps:g}"
            )
        w = 1.0 - self.eps * u
        return -self.k * np.log(w), self.rho_x * u / w

    def domain_bound(self) -> float:
        return 1.0 / self.eps

    def sample_own(self, prev: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        shape = self.k + (rng.poisson(self.rho_x * prev / self.eps) if self.rho_x > 0 else 0.0)
        return self.eps * rng.standard_gamma(shape)

    def in_state_space(self, x) -> bool:
        return bool(np.all(np.asarray(x) >= 0))


@dataclass(frozen=True)
class ConstantOne:
    """Point mass at 1; log-MGF constant 0 with lag coefficient u."""

    kind: str = field(default="constant_one", init=False)
    nonnegative: bool = field(default=True, init=False)

    def log_mgf(self, u: ComplexLike):
        return np.zeros_like(np.asarray(u)), u

    def domain_bound(self) -> float:
        return np.inf

    def sample_own(self, prev: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return np.ones_like(prev)

    def in_state_space(self, x) -> bool:
        return bool(np.all(np.asarray(x) == 1.0))


Coordinate = Union[GaussianAR1, AutoregressiveGamma, ConstantOne]


@dataclass(frozen=True, eq=False)
class MarketSpec:
    """Discounted stock S_t = exp(a0 * t + a . Y_t)."""

    a0: float
    a: np.ndarray
    enforce_martingale: bool = False

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))


@dataclass(frozen=True, eq=False)
class AffineModel:
    """Driving process Z = (X, Y) plus the stock specification.

    ``z0`` stacks the initial state as (X_0, Y_0).  Construction validates
    state-space membership, loading targets, and (when requested) the
    martingale calibration B_Q(a) = a, A_Q(a) = -a0.  Instances are
    immutable and safe for concurrent use; sampling needs per-thread rngs.
    """

    x_coords: tuple
    y_coords: tuple
    z0: np.ndarray
    market: MarketSpec

    def __post_init__(self):
        object.__setattr__(self, "x_coords", tuple(self.x_coords))
        object.__setattr__(self, "y_coords", tuple(self.y_coords))
        object.__setattr__(self, "z0", np.asarray(self.z0, dtype=float))
        if self.d1 < 1 or self.d2 < 1:
            raise ConfigError("need at least one X and one Y coordinate")
        if self.z0.shape != (self.d1 + self.d2,):
            raise DimensionError(
                f"z0 has length {self.z0.size}, expected d1+d2 = {self.d1 + self.d2}"
            )
        for j, c in enumerate(self.x_coords):
            if not c.in_state_space(self.x0[j]):
                raise ConfigError(f"x_coords[{j}] initial value {self.x0[j]} outside its state space")
            idx = getattr(c, "y_index", None)
            if idx is not None:
                if not 0 <= idx < self.d2:
                    raise ConfigError(f"x_coords[{j}] y_index {idx} out of range")
                if not self.y_coords[idx].nonnegative:
                    raise ConfigError(
                        f"x_coords[{j}] loads on y_coords[{idx}], which is not nonnegative"
                    )
        for j, c in enumerate(self.y_coords):
            if not c.in_state_space(self.y0[j]):
                raise ConfigError(f"y_coords[{j}] initial value {self.y0[j]} outside its state space")
        if self.market.a.shape != (self.d2,):
            raise DimensionError(f"market loading a has length {self.market.a.size}, expected {self.d2}")
        if self.market.enforce_martingale:
            ok, err = self.martingale_residual()
            if not ok:
                raise ConfigError(f"martingale flag set but calibration is off by {err:.3e}")

    @property
    def d1(self) -> int:
        return len(self.x_coords)

    @property
    def d2(self) -> int:
        return len(self.y_coords)

    @property
    def x0(self) -> np.ndarray:
        return self.z0[: self.d1]

    @property
    def y0(self) -> np.ndarray:
        return self.z0[self.d1 :]

    def martingale_residual(self, atol: float = 1e-10):
        """Check B_Q(a) = a and A_Q(a) = -a0; return (ok, max abs residual)."""
        a_q, b_q = logmgf_Y_Q(self, self.market.a.astype(complex))
        err = max(float(np.max(np.abs(b_q - self.market.a))), abs(float(a_q.real) + self.market.a0), abs(float(a_q.imag)))
        return err <= atol, err


def logmgf_Y_Q(model: AffineModel, u: np.ndarray):
    """Model-level (A_Q, B_Q) at argument u (last axis = d2).

    Supports batched arguments: u of shape (..., d2) returns A_Q of shape
    (...,) and B_Q of shape (..., d2).  Raises DomainError outside the
    convergence strip, DimensionError on a length mismatch.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape[-1:] != (model.d2,):
        raise DimensionError(f"u has last dimension {u.shape[-1:]}, expected {model.d2}")
    a_q = np.zeros(u.shape[:-1], dtype=complex)
    b_q = np.empty_like(u)
    for j, coord in enumerate(model.y_coords):
        const, lag = coord.log_mgf(u[..., j])
        a_q = a_q + const
        b_q[..., j] = lag
    return a_q, b_q


def logmgf_X_P(model: AffineModel, u: np.ndarray):
    """Model-level (alpha, beta, gamma) at argument u (last axis = d1)."""
    u = np.asarray(u, dtype=complex)
    if u.shape[-1:] != (model.d1,):
        raise DimensionError(f"u has last dimension {u.shape[-1:]}, expected {model.d1}")
    alpha = np.zeros(u.shape[:-1], dtype=complex)
    beta = np.empty_like(u)
    gamma = np.zeros(u.shape[:-1] + (model.d2,), dtype=complex)
    for j, coord in enumerate(model.x_coords):
        const, lag = coord.log_mgf(u[..., j])
        alpha = alpha + const
        beta[..., j] = lag
        eta = getattr(coord, "eta", 0.0)
        if eta:
            gamma[..., coord.y_index] += eta * u[..., j]
    return alpha, beta, gamma


def step_Y_Q(model: AffineModel, y: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw Y_{t+1} given Y_t under Q.  Accepts (d2,) or (n, d2) states."""
    y = np.asarray(y, dtype=float)
    squeeze = y.ndim == 1
    y2 = np.atleast_2d(y)
    if y2.shape[1] != model.d2:
        raise DimensionError(f"state has {y2.shape[1]} Y components, expected {model.d2}")
    out = np.empty_like(y2)
    for j, coord in enumerate(model.y_coords):
        out[:, j] = coord.sample_own(y2[:, j], rng)
    return out[0] if squeeze else out


def step_X_P(model: AffineModel, x: np.ndarray, y_next: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw X_t given (X_{t-1}, Y_t) under P.  Accepts vectors or batches."""
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    x2 = np.atleast_2d(x)
    y2 = np.atleast_2d(np.asarray(y_next, dtype=float))
    if x2.shape[1] != model.d1:
        raise DimensionError(f"state has {x2.shape[1]} X components, expected {model.d1}")
    out = np.empty_like(x2)
    for j, coord in enumerate(model.x_coords):
        out[:, j] = coord.sample_own(x2[:, j], rng)
        eta = getattr(coord, "eta", 0.0)
        if eta:
            out[:, j] += eta * y2[:, coord.y_index]
    return out[0] if squeeze else out


def stock_values(model: AffineModel, y_paths: np.ndarray) -> np.ndarray:
    """Discounted stock along Y paths of shape (..., T+1, d2) -> (..., T+1)."""
    t = np.arange(y_paths.shape[-2])
    return np.exp(model.market.a0 * t + y_paths @ model.market.a)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

_COORD_KEYS = {
    "gaussian_ar1": {"mu", "rho", "sigma"},
    "autoregressive_gamma": {"k", "eps", "rho_x", "eta", "y_index"},
    "constant_one": set(),
}


def _coord_from_dict(d: dict, where: str) -> Coordinate:
    if not isinstance(d, dict) or "kind" not in d:
        raise ConfigError(f"{where}: coordinate entries need a 'kind' field")
    kind = d["kind"]
    params = d.get("params", {})
    if kind not in _COORD_KEYS:
        raise ConfigError(f"{where}: unknown coordinate kind {kind!r}")
    extra = set(params) - _COORD_KEYS[kind]
    if extra:
        raise ConfigError(f"{where}: unknown parameters {sorted(extra)} for kind {kind!r}")
    try:
        if kind == "gaussian_ar1":
            return GaussianAR1(mu=float(params["mu"]), rho=float(params["rho"]), sigma=float(params["sigma"]))
        if kind == "autoregressive_gamma":
            return AutoregressiveGamma(
                k=float(params["k"]),
                eps=float(params["eps"]),
                rho_x=float(params.get("rho_x", 0.0)),
                eta=float(params.get("eta", 0.0)),
                y_index=None if params.get("y_index") is None else int(params["y_index"]),
            )
        return ConstantOne()
    except KeyError as e:
        raise ConfigError(f"{where}: missing parameter {e.args[0]!r} for kind {kind!r}") from None


def model_from_dict(cfg: dict) -> AffineModel:
    """Build an AffineModel from the structured configuration document."""
    for key in ("x_coords", "y_coords", "z0", "market"):
        if key not in cfg:
            raise ConfigError(f"model config: missing field {key!r}")
    market_cfg = cfg["market"]
    for key in ("a0", "a"):
        if key not in market_cfg:
            raise ConfigError(f"model config: market is missing field {key!r}")
    x_coords = tuple(_coord_from_dict(d, f"x_coords[{i}]") for i, d in enumerate(cfg["x_coords"]))
    y_coords = tuple(_coord_from_dict(d, f"y_coords[{i}]") for i, d in enumerate(cfg["y_coords"]))
    market = MarketSpec(
        a0=float(market_cfg["a0"]),
        a=np.asarray(market_cfg["a"], dtype=float),
        enforce_martingale=bool(market_cfg.get("enforce_martingale", False)),
    )
    return AffineModel(x_coords=x_coords, y_coords=y_coords, z0=np.asarray(cfg["z0"], dtype=float), market=market)


def load_model(path) -> AffineModel:
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"model config {path}: invalid JSON ({e})") from None
    return model_from_dict(cfg)
