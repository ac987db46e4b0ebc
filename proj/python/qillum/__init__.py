"""Quantum illumination receivers, error exponents and Chernoff bounds."""

from ._core import (
    EXIT_ERROR,
    EXIT_OK,
    EXIT_VALIDATION_FAILED,
    QillumError,
    ScenarioParams,
    curves,
    exponents,
    homodyne_error_prob,
    main,
    opa_error_prob,
    pc_error_prob,
    qcb_coherent,
    qcb_tmsv,
    simulate_opa,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "EXIT_ERROR",
    "EXIT_OK",
    "EXIT_VALIDATION_FAILED",
    "QillumError",
    "ScenarioParams",
    "curves",
    "exponents",
    "homodyne_error_prob",
    "main",
    "opa_error_prob",
    "pc_error_prob",
    "qcb_coherent",
    "qcb_tmsv",
    "simulate_opa",
    "validate",
]
