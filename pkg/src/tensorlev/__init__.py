"""Leverage score sampling for tensor-product and polynomial-kernel features."""

__version__ = "0.1.0"

from .errors import ContractError, DataError, NumericalError  # noqa: E402
from .features import Gpk, SelfTensor, TensorProduct, frobenius_sq  # noqa: E402
from .recursive import SamplerRunConfig, recursive_leverage_sample, spectral_check  # noqa: E402
from .rng import RngStream  # noqa: E402
from .samplers import (  # noqa: E402
    RowSamplerConfig,
    SampledRows,
    materialize_sampled_rows,
    row_sampler_gpk,
    row_sampler_selftensor,
    row_sampler_tensor,
)

__all__ = [
    "ContractError", "DataError", "NumericalError", "Gpk", "SelfTensor", "TensorProduct",
    "frobenius_sq", "SamplerRunConfig", "recursive_leverage_sample", "spectral_check",
    "RngStream", "RowSamplerConfig", "SampledRows", "materialize_sampled_rows",
    "row_sampler_gpk", "row_sampler_selftensor", "row_sampler_tensor",
]
