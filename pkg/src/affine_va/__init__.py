"""Variable-annuity valuation in a discrete-time affine insurance-finance setup.

Closed-form leg prices via backward coefficient recursions and damped
Fourier quadrature, verified against an independent Monte Carlo oracle.
"""

from .contracts import VAContract, fund_value, guarantee_value, load_contract, settle_date
from .coordinates import (
    AffineModel,
    AutoregressiveGamma,
    ConstantOne,
    GaussianAR1,
    MarketSpec,
    load_model,
    logmgf_X_P,
    logmgf_Y_Q,
    model_from_dict,
    step_X_P,
    step_Y_Q,
)
from .hazards import (
    HazardLoadings,
    HazardPath,
    IntensityLoading,
    SurvivalCopula,
    atom_prob,
    cum_hazard,
    gamma_surface,
    load_loadings,
    sample_times,
    single_time_payoff_formula,
    two_time_payoff_formula,
)
from .oracle import McEstimate, PathEnsemble, Verdict, compare, mc_kernel_estimate, mc_leg, simulate
from .pricing import (
    PriceReport,
    QuadratureSpec,
    fourier_damped_call,
    price_db,
    price_gmab,
    price_premium_leg,
    price_sb,
    price_va,
    solve_fair_guarantee,
)
from .recursion import (
    CoefficientTable,
    LegSpec,
    QCapCoefficients,
    build_table,
    composed_kernel_exponent,
    expectation_kernel,
    kappa,
    q_cap,
    ratio_survival_exponents,
    ratio_survival_kernel,
)

__version__ = "0.1.0"
