"""Tail and moment bounds for multilinear forms in dependent variables."""

from ._chaos_tails import (  # noqa: F401
    ChaosTailsError,
    CoefficientField,
    TailFunction,
    bound,
    empirical_moments,
    empirical_tail,
    exact_oracle_tail,
    exponent_G,
    exponent_gamma_dq,
    exponent_M,
    exponent_Nd,
    log_refined_recursion,
    lower_envelope_probe,
    moment_constant_gamma,
    product_compose,
    simulate,
    theorem13_tail,
    theorem14_tail,
    theorem15_moment,
    theorem16_moment,
    truncation_operator_W,
    ustat_scale_t,
    vector_L,
    vector_N_qr,
    verify,
)

__version__ = "0.1.0"
