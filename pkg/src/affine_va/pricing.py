"""Closed-form time-0 prices of the variable-annuity legs.

The four legs of the contract decompose into survival/ratio kernels
(recursion module) and, for the option-shaped payoffs, a damped Fourier
representation of the call: for w > 1,

    (e^{Abar + x} - K)^+ = int_R e^{(w + i*lam) x} f(w, lam, Abar) d lam,
    f(w, lam, Abar) = e^{(w+i*lam) Abar} K^{-(w-1+i*lam)}
                      / (2*pi * (w+i*lam) * (w-1+i*lam)).

The integral is evaluated over lam >= 0 only and doubled (the integrand at
-lam is the conjugate), with Gauss-Legendre or trapezoid nodes.  The net
constant (a single 1/(2*pi)) is pinned by exact agreement with the
lognormal call value in the zero-hazard Gaussian case, which the test
suite enforces.

Closed forms require the independence copula; anything else is referred to
the Monte Carlo oracle.  All functions are pure; leg prices at time 0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .contracts import VAContract, guarantee_value, settle_date
from .coordinates import AffineModel
from .errors import (
    BracketError,
    ConfigError,
    TruncationWarning,
    UnsupportedContractError,
    UnsupportedCopulaError,
)
from .hazards import HazardLoadings, SurvivalCopula
from .recursion import EXP_BOUND, ratio_survival_exponents, ratio_survival_kernel


@dataclass(frozen=True)
class QuadratureSpec:
    """Damped Fourier quadrature settings (w > 1 required)."""

    w: float = 2.0
    lambda_max: float = 200.0
    n_nodes: int = 400
    rule: str = "gauss_legendre"
    tail_tol: float = 1e-8

    def __post_init__(self):
        if self.w <= 1.0:
            raise ConfigError(f"damping must satisfy w > 1, got {self.w}")
        if self.lambda_max <= 0 or self.n_nodes < 8:
            raise ConfigError("need lambda_max > 0 and n_nodes >= 8")
        if self.rule not in ("gauss_legendre", "trapezoid"):
            raise ConfigError(f"unknown quadrature rule {self.rule!r}")

    def refined(self, factor: int = 2) -> "QuadratureSpec":
        return QuadratureSpec(self.w, self.lambda_max * factor, self.n_nodes * factor,
                              self.rule, self.tail_tol)


@dataclass
class PriceReport:
    premium_leg: float
    gmab: float
    sb: float
    db: float
    va_total: float
    diagnostics: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "premium_leg": self.premium_leg,
            "gmab": self.gmab,
            "sb": self.sb,
            "db": self.db,
            "va_total": self.va_total,
            "diagnostics": self.diagnostics,
        }


@lru_cache(maxsize=16)
def _leggauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def _nodes(quad: QuadratureSpec):
    if quad.rule == "gauss_legendre":
        x, w = _leggauss(quad.n_nodes)
        lam = 0.5 * quad.lambda_max * (x + 1.0)
        wts = 0.5 * quad.lambda_max * w
    else:
        lam = np.linspace(0.0, quad.lambda_max, quad.n_nodes)
        wts = np.full(quad.n_nodes, lam[1] - lam[0])
        wts[0] *= 0.5
        wts[-1] *= 0.5
    return lam, wts


def _f_tilde(w: float, lam: np.ndarray, K: float, abar: float) -> np.ndarray:
    z = w + 1j * lam
    return np.exp(z * abar - (z - 1.0) * math.log(K)) / (2.0 * math.pi * z * (z - 1.0))


def _fourier_call(exponent_fn: Callable[[np.ndarray], np.ndarray], K: float, abar: float,
                  quad: QuadratureSpec):
    lam, wts = _nodes(quad)
    exponents = np.asarray(exponent_fn(lam))
    if np.max(exponents.real) > EXP_BOUND:
        raise OverflowError("damped kernel exponent exceeds the overflow bound")
    integrand = np.exp(exponents) * _f_tilde(quad.w, lam, K, abar)
    contrib = 2.0 * wts * integrand.real
    value = float(np.sum(contrib))
    k_tail = max(1, quad.n_nodes // 20)
    order = np.argsort(lam)
    tail = float(np.sum(np.abs(contrib[order][-k_tail:])))
    tail_rel = tail / max(abs(value), 1e-300)
    return value, tail_rel


def fourier_damped_call(exponent_fn: Callable[[np.ndarray], np.ndarray], K: float, abar: float,
                        quad: QuadratureSpec) -> float:
    """Call value int exp(exponent_fn(lam)) f(w, lam, abar) d lam over the real line.

    ``exponent_fn`` maps an array of lam nodes to the complex kernel
    exponents at damping zeta = w + i*lam (a0 excluded: abar carries it).
    Conjugate symmetry is assumed and the lam >= 0 half is doubled.  K must
    be strictly positive; a TruncationWarning is issued when the estimated
    tail mass exceeds quad.tail_tol.
    """
    if K <= 0:
        raise ConfigError("fourier strike must be > 0 (use the forward kernel for K = 0)")
    value, tail_rel = _fourier_call(exponent_fn, K, abar, quad)
    if tail_rel > quad.tail_tol:
        warnings.warn(f"quadrature tail estimate {tail_rel:.2e} exceeds {quad.tail_tol:.2e}",
                      TruncationWarning, stacklevel=2)
    return value


def _require_independence(loadings: HazardLoadings, copula: Optional[SurvivalCopula]):
    cop = copula if copula is not None else loadings.copula
    if not cop.is_independence:
        raise UnsupportedCopulaError(
            "closed-form legs need the independence copula; use the Monte Carlo oracle instead"
        )


def price_premium_leg(model: AffineModel, contract: VAContract, loadings: HazardLoadings,
                      copula: Optional[SurvivalCopula] = None) -> float:
    """Premium leg Pi_0 (negative of the survival-weighted payment value)."""
    _require_independence(loadings, copula)
    loadings.validate_for_model(model)
    total = -contract.payment_at_zero
    for ti, pi in zip(contract.grid, contract.payments):
        kernel = ratio_survival_kernel(
            model, T=ti, r_m=ti, r_s=ti,
            loading_m=loadings.mortality, loading_s=loadings.surrender,
            include_stock=False,
        )
        total -= contract.beta(0, ti) * pi * kernel.real
    return total


def price_sb(model: AffineModel, contract: VAContract, loadings: HazardLoadings,
             copula: Optional[SurvivalCopula] = None, term_table: Optional[list] = None) -> float:
    """Surrender benefit: decisions in (T_{k-1}, T_k] settle at T_k.

    Surrender at t pays only while the policyholder is alive through t
    (event {tau_s = t, tau_m > t}); each term is the difference of two
    ratio kernels with the surrender hazard run to t-1 and to t.
    """
    _require_independence(loadings, copula)
    loadings.validate_for_model(model)
    total = 0.0
    prev = 0
    for tk, _ in zip(contract.grid, contract.payments):
        beta_k = contract.beta(0, tk)
        pen = contract.penalty[tk]
        for ti, pi in zip(contract.grid, contract.payments):
            if ti > tk:
                break
            for t in range(prev + 1, tk + 1):
                common = dict(T=tk, T_prime=ti, loading_m=loadings.mortality,
                              loading_s=loadings.surrender, include_stock=True)
                k_alive = ratio_survival_kernel(model, r_m=t, r_s=t - 1, **common)
                k_both = ratio_survival_kernel(model, r_m=t, r_s=t, **common)
                term = beta_k * pen * pi * (k_alive - k_both).real
                total += term
                if term_table is not None:
                    term_table.append({"T_k": tk, "T_i": ti, "t": t, "value": term})
        prev = tk
    return total


def _check_n1(contract: VAContract):
    if contract.n != 1:
        raise UnsupportedContractError("GMAB/DB closed form requires n=1")


def price_gmab(model: AffineModel, contract: VAContract, loadings: HazardLoadings,
               quad: QuadratureSpec = QuadratureSpec(),
               copula: Optional[SurvivalCopula] = None,
               diagnostics: Optional[dict] = None) -> float:
    """Accumulation benefit at maturity, max(F_T, K_T) on joint survival."""
    _check_n1(contract)
    _require_independence(loadings, copula)
    loadings.validate_for_model(model)
    T = contract.maturity
    t1 = contract.grid[0]
    pi1 = contract.payments[0]
    k_guar = guarantee_value(contract, T)
    lm, ls = loadings.mortality, loadings.surrender
    surv = ratio_survival_kernel(model, T=T, r_m=T, r_s=T, loading_m=lm, loading_s=ls,
                                 include_stock=False).real
    if k_guar <= 0:
        call = ratio_survival_kernel(model, T=T, r_m=T, r_s=T, T_prime=t1,
                                     loading_m=lm, loading_s=ls, include_stock=True).real
    else:
        def exponent_fn(lam):
            return ratio_survival_exponents(
                model, T=T, r_m=T, r_s=T, T_prime=t1, loading_m=lm, loading_s=ls,
                zeta=quad.w + 1j * lam, include_stock=True, a0_in_exponent=False,
            )

        abar = model.market.a0 * (T - t1)
        call, tail = _fourier_call(exponent_fn, k_guar / pi1, abar, quad)
        if diagnostics is not None:
            diagnostics.setdefault("tails", {})["gmab"] = tail
        if tail > quad.tail_tol:
            warnings.warn(f"GMAB quadrature tail estimate {tail:.2e} exceeds {quad.tail_tol:.2e}",
                          TruncationWarning, stacklevel=2)
    return contract.beta(0, T) * (k_guar * surv + pi1 * call)


def price_db(model: AffineModel, contract: VAContract, loadings: HazardLoadings,
             quad: QuadratureSpec = QuadratureSpec(),
             copula: Optional[SurvivalCopula] = None,
             diagnostics: Optional[dict] = None) -> float:
    """Death benefit: death at t (no surrender through t) settles at the
    next grid date r with max(F_r, K_r).

    Deaths at t <= T_1 settle at T_1 where the fund equals the payment, so
    the call term is (1 - K)^+ = 0 exactly and only the guarantee term
    remains.  Later deaths settle at T and use damped ratio kernels with
    the mortality hazard run to t-1 / t and the surrender hazard to t.
    """
    _check_n1(contract)
    _require_independence(loadings, copula)
    loadings.validate_for_model(model)
    t1 = contract.grid[0]
    pi1 = contract.payments[0]
    lm, ls = loadings.mortality, loadings.surrender
    total = 0.0
    tails = []
    terms = []
    for t in range(1, contract.maturity + 1):
        r = settle_date(contract, t)
        k_guar = guarantee_value(contract, r)
        surv_pair = [
            ratio_survival_kernel(model, T=t, r_m=t - 1, r_s=t, loading_m=lm, loading_s=ls,
                                  include_stock=False).real,
            ratio_survival_kernel(model, T=t, r_m=t, r_s=t, loading_m=lm, loading_s=ls,
                                  include_stock=False).real,
        ]
        surv_diff = surv_pair[0] - surv_pair[1]
        if r == t1:
            call_t = max(0.0, 1.0 - k_guar / pi1) * surv_diff
        elif k_guar <= 0:
            call_t = (
                ratio_survival_kernel(model, T=r, r_m=t - 1, r_s=t, T_prime=t1,
                                      loading_m=lm, loading_s=ls, include_stock=True).real
                - ratio_survival_kernel(model, T=r, r_m=t, r_s=t, T_prime=t1,
                                        loading_m=lm, loading_s=ls, include_stock=True).real
            )
        else:
            abar = model.market.a0 * (r - t1)
            values = []
            for rm in (t - 1, t):
                def exponent_fn(lam, rm=rm):
                    return ratio_survival_exponents(
                        model, T=r, r_m=rm, r_s=t, T_prime=t1, loading_m=lm, loading_s=ls,
                        zeta=quad.w + 1j * lam, include_stock=True, a0_in_exponent=False,
                    )

                value, tail = _fourier_call(exponent_fn, k_guar / pi1, abar, quad)
                values.append(value)
                tails.append(tail)
            call_t = values[0] - values[1]
        term = contract.beta(0, r) * (k_guar * surv_diff + pi1 * call_t)
        total += term
        terms.append({"t": t, "settle": r, "value": term})
    if diagnostics is not None:
        if tails:
            diagnostics.setdefault("tails", {})["db_max"] = max(tails)
        diagnostics["db_terms"] = terms
    if tails and max(tails) > quad.tail_tol:
        warnings.warn(f"DB quadrature tail estimate {max(tails):.2e} exceeds {quad.tail_tol:.2e}",
                      TruncationWarning, stacklevel=2)
    return total


def price_va(model: AffineModel, contract: VAContract, loadings: HazardLoadings,
             quad: QuadratureSpec = QuadratureSpec()) -> PriceReport:
    """All four legs and their sum, with quadrature/domain diagnostics."""
    diagnostics: dict = {
        "quadrature": {"w": quad.w, "lambda_max": quad.lambda_max,
                       "n_nodes": quad.n_nodes, "rule": quad.rule},
    }
    stats: dict = {}
    ratio_survival_exponents(
        model, T=contract.maturity, r_m=contract.maturity, r_s=contract.maturity,
        T_prime=contract.grid[0], loading_m=loadings.mortality, loading_s=loadings.surrender,
        zeta=complex(quad.w), include_stock=True, stats=stats,
    )
    diagnostics["domain_margin"] = stats.get("domain_margin", float("inf"))
    premium = price_premium_leg(model, contract, loadings)
    sb_terms: list = []
    sb = price_sb(model, contract, loadings, term_table=sb_terms)
    gmab = price_gmab(model, contract, loadings, quad, diagnostics=diagnostics)
    db = price_db(model, contract, loadings, quad, diagnostics=diagnostics)
    diagnostics["sb_terms"] = sb_terms
    return PriceReport(
        premium_leg=premium, gmab=gmab, sb=sb, db=db,
        va_total=premium + gmab + sb + db, diagnostics=diagnostics,
    )


def solve_fair_guarantee(model: AffineModel, contract: VAContract, loadings: HazardLoadings,
                         quad: QuadratureSpec = QuadratureSpec(), target: float = 0.0,
                         bracket: tuple = (-0.05, 0.10), max_iter: int = 200) -> float:
    """Bisection for the guarantee rate delta* with va_total(delta*) = target.

    Requires va_total to change sign over the bracket (monotonicity in delta
    is the caller's responsibility).  Tolerance: |va_total - target| below
    1e-8 times the total payments.
    """
    tol = 1e-8 * (sum(contract.payments) + contract.payment_at_zero)

    def f(delta: float) -> float:
        return price_va(model, contract.with_delta(delta), loadings, quad).va_total - target

    lo, hi = bracket
    f_lo, f_hi = f(lo), f(hi)
    if abs(f_lo) < tol:
        return lo
    if abs(f_hi) < tol:
        return hi
    if f_lo * f_hi > 0:
        raise BracketError(f"no sign change on [{lo}, {hi}]: f(lo)={f_lo:.6g}, f(hi)={f_hi:.6g}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if abs(f_mid) < tol:
            return mid
        if f_lo * f_mid < 0:
            hi, f_hi = mid, f_mid
        else:
            lo, f_lo = mid, f_mid
    raise BracketError(f"bisection did not reach tolerance {tol:.3g} in {max_iter} iterations")
