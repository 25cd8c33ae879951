"""Recursive ridge leverage score sampling.

Start from a huge regularizer lam_0 = ||Phi||_F^2 / eps, where row norms
of Phi are already good leverage proxies, and halve it level by level.
Each level samples rows of Phi (B^T B + lam I)^{-1/2} with B the sketch
from the previous level.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .features import FeatureDescriptor
from .oracle import spectral_check  # noqa: F401  (re-exported)
from .rng import DRIVER, RngStream
from .samplers import RowSamplerConfig, SampledRows, materialize_sampled_rows, row_sampler

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SamplerRunConfig:
    eps: float
    lam: float
    mu: float
    C: float = 4.0
    seed: int = 0
    sampler: RowSamplerConfig = field(default_factory=RowSamplerConfig)
    max_ratio_exponent: float = 8.0

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ContractError("eps must lie in (0, 1)")
        if not self.lam > 0:
            raise ContractError("lambda must be positive")
        if not self.mu >= 1:
            raise ContractError("mu must be at least 1")
        if not self.C > 0:
            raise ContractError("C must be positive")

    def n_samples(self, n: int) -> int:
        return math.ceil(self.C * self.mu / self.eps**2 * max(1.0, math.log2(n)))


@dataclass(frozen=True, eq=False)
class RecursiveResult:
    rows: SampledRows
    Z: np.ndarray
    lambdas: tuple[float, ...]  # regularizer passed to each level's sampler

    @property
    def s(self) -> int:
        return self.rows.s


def level_schedule(fro_sq: float, eps: float, lam: float) -> tuple[float, ...]:
    """Regularizers lam_0, ..., lam_{T-1} handed to the T sampler calls."""
    lam0 = fro_sq / eps
    T = math.ceil(math.log2(lam0 / lam)) if lam0 > lam else 0
    if T <= 0:
        log.info("lambda >= lambda_0; running a single level at lambda_0")
        return (lam0,)
    return tuple(lam0 / 2**t for t in range(T))


def recursive_leverage_sample(desc: FeatureDescriptor, cfg: SamplerRunConfig) -> RecursiveResult:
    n = desc.n
    fro = desc.frobenius_sq
    if not fro > 0:
        raise ContractError("Phi is identically zero")
    if fro / (cfg.eps * cfg.lam) > max(n, 2) ** cfg.max_ratio_exponent:
        raise ContractError("||Phi||_F^2 / (eps lam) exceeds the configured poly(n) cap")
    s = cfg.n_samples(n)
    root = RngStream(cfg.seed).child(DRIVER)
    B = np.zeros((1, n))
    rows = None
    lambdas = level_schedule(fro, cfg.eps, cfg.lam)
    for t, lam_t in enumerate(lambdas):
        rows = row_sampler(desc, B, lam_t, s, cfg.sampler, root.child(t))
        B = materialize_sampled_rows(rows, desc)
    return RecursiveResult(rows, B, lambdas)
