"""Backward coefficient recursions for closed-form expectations.

Every quantity priced by the engine is an expectation of the form

    E[ (S_T / S_T')^            e^{-Lambda^m_{r_m} - Lambda^s_{r_s}} | Z_0 ],

whose logarithm is affine in Z_0.  Writing the integrand as
exp( sum_t k^1(t) . X_t + k^2(t) . Y_t ) with per-time coefficient vectors
k(t), one backward step through time t replaces

    u = psi1(t+1) + k^1(t),   v = psi2(t+1) + k^2(t)

by the accumulator phi(t) = alpha(u) + A_Q(v + gamma(u)) and the new state
coefficients psi1(t) = beta(u), psi2(t) = B_Q(v + gamma(u)).  The selector
``kappa`` produces the hazard coefficient vectors for the standard legs
(single or two stopping times with regime switch s); ratio dates inject the
stock loading with a minus sign at the ratio time index.  Steps above the
hazard horizon carry only stock coefficients, where the same backward step
reduces to the capitalization chain of ``q_cap``.

All coefficient evaluations are pure functions of immutable inputs and are
safe for concurrent use; the backward pass is vectorized over batches of
damped stock loadings (one row per quadrature node).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .coordinates import AffineModel, logmgf_X_P, logmgf_Y_Q
from .errors import DomainError
from .hazards import IntensityLoading

# Exponents with real part above this bound abort instead of overflowing.
EXP_BOUND = 700.0


def kappa(a, loading_m: IntensityLoading, loading_s: Optional[IntensityLoading], t: int, s: int, T: int):
    """Per-time hazard/stock coefficient selector.

    Returns (kappa1, kappa2) for time index t with regime switch s and
    terminal T:

        t = T, s < T :  (-b^m, a - c^m)
        t = T, s = T :  (-b^m - b^s, a - c^m - c^s)   [terminal tie]
        s < t < T    :  (-b^m, -c^m)
        t <= s       :  (-b^m - b^s, -c^m - c^s)

    ``a`` may be a (d2,) vector or a batch (m, d2); the second component
    broadcasts accordingly.
    """
    if t > T or t < 0:
        raise IndexError(f"time index t={t} outside 0..{T}")
    if s > T or s < 0:
        raise IndexError(f"regime index s={s} outside 0..{T}")
    bm, cm = loading_m.b, loading_m.c
    if loading_s is None:
        bs = np.zeros_like(bm)
        cs = np.zeros_like(cm)
    else:
        bs, cs = loading_s.b, loading_s.c
    a = np.asarray(a)
    if t == T:
        if s == T:
            return -(bm + bs), a - cm - cs
        return -bm, a - cm
    if s < t:
        return -bm, -cm + np.zeros_like(a)
    return -(bm + bs), -(cm + cs) + np.zeros_like(a)


@dataclass(frozen=True, eq=False)
class LegSpec:
    """Inputs of one coefficient table.

    Unprimed semantics: the mortality hazard runs to T, the surrender hazard
    to the regime switch s; ``primed`` swaps the two loadings.  ``a`` is the
    stock loading at T (possibly damped, (w + i*lambda) * a); ``T_prime``
    adds the ratio S_T / S_{T'} by injecting -a at time index T'.
    """

    T: int
    s: int
    a0: float
    a: np.ndarray
    loading_m: IntensityLoading
    loading_s: Optional[IntensityLoading] = None
    T_prime: Optional[int] = None
    primed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=complex))
        if not 0 <= self.s <= self.T:
            raise IndexError(f"need 0 <= s <= T, got s={self.s}, T={self.T}")
        if self.T_prime is not None and not 0 < self.T_prime < self.T:
            raise IndexError(f"need 0 < T_prime < T, got T_prime={self.T_prime}")


@dataclass(frozen=True, eq=False)
class CoefficientTable:
    """phi/psi recursion output; index t runs over 0..T.

    Phi(t) is the suffix sum of phi over t+1..T, so Phi(T) = 0 and
    Phi(t) - Phi(t+1) = phi(t+1).  The exponent of the leg's expectation at
    time 0 is Phi(0) + psi1(1) . X_0 + psi2(1) . Y_0 (plus the a0 term
    applied by ``expectation_kernel``).
    """

    phi: np.ndarray
    psi1: np.ndarray
    psi2: np.ndarray
    Phi: np.ndarray
    leg: LegSpec

    def exponent_at_zero(self, model: AffineModel) -> complex:
        return complex(self.Phi[0] + self.psi1[1] @ model.x0 + self.psi2[1] @ model.y0)

    def dump(self, path) -> None:
        """Write one row per time index with real/imag parts of all entries."""
        d1, d2 = self.psi1.shape[1], self.psi2.shape[1]
        cols = ["t", "phi_re", "phi_im", "Phi_re", "Phi_im"]
        cols += [f"psi1_{j}_{p}" for j in range(d1) for p in ("re", "im")]
        cols += [f"psi2_{j}_{p}" for j in range(d2) for p in ("re", "im")]
        with open(path, "w") as fh:
            fh.write("\t".join(cols) + "\n")
            for t in range(self.phi.size):
                row = [str(t), f"{self.phi[t].real:.17g}", f"{self.phi[t].imag:.17g}",
                       f"{self.Phi[t].real:.17g}", f"{self.Phi[t].imag:.17g}"]
                for j in range(d1):
                    row += [f"{self.psi1[t, j].real:.17g}", f"{self.psi1[t, j].imag:.17g}"]
                for j in range(d2):
                    row += [f"{self.psi2[t, j].real:.17g}", f"{self.psi2[t, j].imag:.17g}"]
                fh.write("\t".join(row) + "\n")


def _backward_pass(model: AffineModel, k1: np.ndarray, k2: np.ndarray, lowest: int = 1,
                   stats: Optional[dict] = None):
    """Run the recursion from t = T down to ``lowest``.

    k1: (T+1, d1) and k2: (..., T+1, d2) per-time coefficients (index 0
    unused unless lowest = 0).  Returns (phi, psi1, psi2) arrays with the
    same leading batch shape, indexed by time; entries below ``lowest``
    are zero.
    """
    T = k1.shape[-2] - 1
    lead = np.broadcast_shapes(k1.shape[:-2], k2.shape[:-2])
    phi = np.zeros(lead + (T + 1,), dtype=complex)
    psi1 = np.zeros(lead + (T + 1, model.d1), dtype=complex)
    psi2 = np.zeros(lead + (T + 1, model.d2), dtype=complex)
    g1 = np.zeros(lead + (model.d1,), dtype=complex)
    g2 = np.zeros(lead + (model.d2,), dtype=complex)
    margin = np.inf
    x_bounds = np.array([c.domain_bound() for c in model.x_coords])
    y_bounds = np.array([c.domain_bound() for c in model.y_coords])
    for t in range(T, lowest - 1, -1):
        u = g1 + k1[..., t, :]
        v = g2 + k2[..., t, :]
        try:
            alpha, beta, gamma = logmgf_X_P(model, u)
            vg = v + gamma
            a_q, b_q = logmgf_Y_Q(model, vg)
        except DomainError as e:
            raise DomainError(f"{e} (recursion step t={t})") from None
        if stats is not None:
            ur = np.real(u).reshape(-1, model.d1)
            vr = np.real(vg).reshape(-1, model.d2)
            margin = min(margin, float(np.min(x_bounds - ur.max(axis=0))),
                         float(np.min(y_bounds - vr.max(axis=0))))
        phi[..., t] = alpha + a_q
        g1 = beta
        g2 = b_q
        psi1[..., t, :] = g1
        psi2[..., t, :] = g2
    if stats is not None:
        stats["domain_margin"] = margin
    return phi, psi1, psi2


def build_table(model: AffineModel, leg: LegSpec) -> CoefficientTable:
    """Backward phi/psi table for a LegSpec-shaped expectation.

    Terminal and interior coefficients come from ``kappa`` at (t, s, T);
    when T_prime is set, the (possibly damped) stock loading is subtracted
    at time index T_prime, which makes the table price the ratio
    S_T / S_{T'}.  Raises DomainError naming the offending step and
    OverflowError when a suffix exponent exceeds EXP_BOUND.
    """
    T = leg.T
    lm, ls = (leg.loading_m, leg.loading_s) if not leg.primed else (leg.loading_s, leg.loading_m)
    if lm is None:
        lm = IntensityLoading(np.zeros(model.d1), np.zeros(model.d2))
    k1 = np.zeros((T + 1, model.d1), dtype=complex)
    k2 = np.zeros((T + 1, model.d2), dtype=complex)
    for t in range(T + 1):
        ka1, ka2 = kappa(leg.a, lm, ls, t, leg.s, T)
        k1[t] = ka1
        k2[t] = ka2
    if leg.T_prime is not None:
        k2[leg.T_prime] -= leg.a
    phi, psi1, psi2 = _backward_pass(model, k1, k2, lowest=0)
    big_phi = np.concatenate([np.cumsum(phi[1:][::-1])[::-1], [0.0 + 0.0j]])
    if np.max(big_phi.real) > EXP_BOUND:
        raise OverflowError(f"suffix exponent real part exceeds {EXP_BOUND}")
    return CoefficientTable(phi=phi, psi1=psi1, psi2=psi2, Phi=big_phi, leg=leg)


@dataclass(frozen=True, eq=False)
class QCapCoefficients:
    """Coefficients of E_Q[S_T | F_t] = exp(A_Qt + B_Qt . Y_t)."""

    A_Qt: complex
    B_Qt: np.ndarray
    t: int
    T: int
    a0: float
    a: np.ndarray


def q_cap(model: AffineModel, t: int, T: int, a0: float, a: np.ndarray) -> QCapCoefficients:
    """Capitalization coefficients by backward composition of (A_Q, B_Q).

    Base case A_Q(T-1, T) = a0*T + A_Q(a), B_Q(T-1, T) = B_Q(a); each
    earlier step maps (A, B) to (A + A_Q(B), B_Q(B)).  t = T returns the
    identity pair (a0*T, a).
    """
    if not 0 <= t <= T:
        raise IndexError(f"need 0 <= t <= T, got t={t}, T={T}")
    a = np.asarray(a, dtype=complex)
    A = a0 * T + 0.0j
    B = a
    for _ in range(T - t):
        step_a, step_b = logmgf_Y_Q(model, B)
        A = A + step_a
        B = step_b
    return QCapCoefficients(A_Qt=complex(A), B_Qt=B, t=t, T=T, a0=a0, a=a)


def expectation_kernel(model: AffineModel, leg: LegSpec,
                       lambda_m_0: float = 0.0, lambda_s_0: float = 0.0) -> complex:
    """Closed-form E[(ratio or S_T or 1) e^{-Lambda^m - Lambda^s} | Z_0].

    Hazard horizons follow the leg: (T, s) unprimed, (s, T) primed.  The
    value is exp(a0 * (T - T') + Phi(0) + psi(1) . Z_0) with T' = 0 when no
    ratio date is set.
    """
    if leg.T == 0:
        return complex(np.exp(-lambda_m_0 - lambda_s_0))
    table = build_table(model, leg)
    a0_term = leg.a0 * (leg.T - (leg.T_prime or 0))
    exponent = a0_term + table.exponent_at_zero(model) - lambda_m_0 - lambda_s_0
    if exponent.real > EXP_BOUND:
        raise OverflowError(f"kernel exponent real part {exponent.real:.1f} exceeds {EXP_BOUND}")
    return complex(np.exp(exponent))


def ratio_survival_exponents(model: AffineModel, *, T: int, r_m: int, r_s: int,
                             loading_m: IntensityLoading, loading_s: IntensityLoading,
                             T_prime: Optional[int] = None, zeta=None,
                             include_stock: bool = True, a0_in_exponent: bool = True,
                             stats: Optional[dict] = None) -> np.ndarray:
    """Log of E[(S_T / S_{T'})^zeta-damped e^{-Lambda^m_{r_m} - Lambda^s_{r_s}} | Z_0].

    The hazard horizons r_m, r_s are decoupled from the stock dates, which
    is what the surrender and death legs need (hazards stop at the event
    time, the fund ratio lives at the settlement and payment dates).  The
    stock coefficient is zeta * a at T and -zeta * a at T_prime; ``zeta``
    may be a complex array (one row per quadrature node), in which case an
    array of exponents is returned.  With include_stock=False the pure
    survival kernel E[e^{-Lambda - Lambda}] is computed (T then only sets
    the recursion horizon).  The a0 contribution zeta * a0 * (T - T') is
    included unless a0_in_exponent=False (the Fourier weight carries it).
    """
    if not (0 <= r_m <= T and 0 <= r_s <= T):
        raise IndexError(f"hazard horizons ({r_m}, {r_s}) outside 0..{T}")
    if T_prime is not None and not 0 <= T_prime <= T:
        raise IndexError(f"T_prime={T_prime} outside 0..{T}")
    scalar = zeta is None or np.ndim(zeta) == 0
    z = np.atleast_1d(np.asarray(1.0 + 0.0j if zeta is None else zeta, dtype=complex))
    if T == 0:
        out = np.zeros(z.size, dtype=complex)
        return complex(out[0]) if scalar else out

    # Hazard block: kappa over the window max(r_m, r_s), with the longer
    # hazard in the first slot (the "primed" swap when surrender runs longer).
    t_h, s_h = (r_m, r_s) if r_m >= r_s else (r_s, r_m)
    lm, ls = (loading_m, loading_s) if r_m >= r_s else (loading_s, loading_m)
    zero_a = np.zeros(model.d2)
    k1 = np.zeros((T + 1, model.d1), dtype=complex)
    k2 = np.zeros((z.size, T + 1, model.d2), dtype=complex)
    for t in range(1, t_h + 1):
        ka1, ka2 = kappa(zero_a, lm, ls, t, s_h, t_h)
        k1[t] = ka1
        k2[:, t, :] += ka2
    a0_term = np.zeros(z.size, dtype=complex)
    if include_stock:
        za = z[:, None] * model.market.a[None, :]
        k2[:, T, :] += za
        if T_prime is not None:
            k2[:, T_prime, :] -= za
        if a0_in_exponent:
            a0_term = z * (model.market.a0 * (T - (T_prime or 0)))
    phi, psi1, psi2 = _backward_pass(model, k1, k2, lowest=1, stats=stats)
    exponent = a0_term + phi[:, 1:].sum(axis=1) + psi1[:, 1, :] @ model.x0 + psi2[:, 1, :] @ model.y0
    return complex(exponent[0]) if scalar else exponent


def ratio_survival_kernel(model: AffineModel, **kwargs) -> complex:
    """Value counterpart of ``ratio_survival_exponents`` (scalar zeta)."""
    exponent = ratio_survival_exponents(model, **kwargs)
    if np.real(exponent) > EXP_BOUND:
        raise OverflowError(f"kernel exponent real part {np.real(exponent):.1f} exceeds {EXP_BOUND}")
    return complex(np.exp(exponent))


def composed_kernel_exponent(model: AffineModel, *, T: int, r_m: int, r_s: int,
                             loading_m: IntensityLoading, loading_s: IntensityLoading,
                             T_prime: Optional[int] = None, zeta: complex = 1.0) -> complex:
    """Same expectation as ``ratio_survival_exponents`` via explicit towers.

    Projects the stock from its dates down to the hazard horizon with
    ``q_cap`` chains and prices the remainder with a terminal-modified
    hazard table.  Exists to pin the unified backward pass against the
    two-stage composition; pricing uses the unified pass.
    """
    zeta = complex(zeta)
    a = zeta * model.market.a
    s_h = max(r_m, r_s)
    if T_prime is not None and T_prime >= s_h:
        # ratio date at/above the hazard horizon: S_T/S_T' projected to T',
        # then the leftover (B_Q(T',T) - a) loading capitalized down to s_h
        top = q_cap(model, T_prime, T, 0.0, a)
        mid = q_cap(model, s_h, T_prime, 0.0, top.B_Qt - a)
        const = zeta * model.market.a0 * (T - T_prime) + top.A_Qt + mid.A_Qt
        extra = mid.B_Qt
    elif T_prime is not None:
        down = q_cap(model, s_h, T, 0.0, a)
        const = zeta * model.market.a0 * (T - T_prime) + down.A_Qt
        extra = down.B_Qt
    else:
        down = q_cap(model, s_h, T, 0.0, a)
        const = zeta * model.market.a0 * T + down.A_Qt
        extra = down.B_Qt

    if s_h == 0:
        # no hazard steps at all: the projected loading multiplies Y_0 directly
        return complex(const + extra @ model.y0)
    t_h, s_reg = (r_m, r_s) if r_m >= r_s else (r_s, r_m)
    lm, ls = (loading_m, loading_s) if r_m >= r_s else (loading_s, loading_m)
    zero_a = np.zeros(model.d2)
    k1 = np.zeros((s_h + 1, model.d1), dtype=complex)
    k2 = np.zeros((s_h + 1, model.d2), dtype=complex)
    for t in range(1, t_h + 1):
        ka1, ka2 = kappa(zero_a, lm, ls, t, s_reg, t_h)
        k1[t] = ka1
        k2[t] = k2[t] + ka2
    k2[s_h] += extra
    if T_prime is not None and T_prime < s_h:
        k2[T_prime] -= a
    phi, psi1, psi2 = _backward_pass(model, k1, k2, lowest=1)
    return complex(const + phi[1:].sum() + psi1[1] @ model.x0 + psi2[1] @ model.y0)
