"""GRW-type flash process simulation: operator core, samplers, and checks."""

from _flashpoint import (
    check_normalization,
    ck_simulate,
    ck_triples_ok,
    constant_model,
    fock_model,
    gaussian_model,
    GrwfModel,
    history_density,
    kk_normalization,
    ks_test_exponential,
    matrix_exp,
    polar_unitary,
    positive_sqrt,
    random_model,
    reconstruct_roundtrip_dev,
    sample_rgrwf,
    simulate,
    stop_probability,
    survival,
    tdist,
    weak_integral,
)

__all__ = [
    "check_normalization",
    "ck_simulate",
    "ck_triples_ok",
    "constant_model",
    "fock_model",
    "gaussian_model",
    "GrwfModel",
    "history_density",
    "kk_normalization",
    "ks_test_exponential",
    "matrix_exp",
    "polar_unitary",
    "positive_sqrt",
    "random_model",
    "reconstruct_roundtrip_dev",
    "sample_rgrwf",
    "simulate",
    "stop_probability",
    "survival",
    "tdist",
    "weak_integral",
]
