import logging
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from .constants.constants import GIBBS_BURN_IN, GIBBS_THINNING
from .core import Dataset, ParamMatrix, ShapeParam, as_shape, check_normalizable
from .errors import InvalidParameterError, NormalizabilityError

logger = logging.getLogger(__name__)

MAX_SEED = 2 ** 64
# sweeps of noise drawn at once; bounds memory for long chains
_NOISE_CHUNK = 1024


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Purpose: builds a counter-based generator for a seed and a derivation key.

    The key (e.g. chain index, or nu-index/lambda-index/replicate) selects an independent stream,
    so the variates a caller sees don't depend on the order other streams are consumed in.
    """
    if not (0 <= int(seed) < MAX_SEED):
        raise InvalidParameterError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))))


@dataclass(frozen=True)
class GibbsConfig:
    n_samples: int
    burn_in: int = GIBBS_BURN_IN
    thinning: int = GIBBS_THINNING
    seed: int = 0
    chain: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise InvalidParameterError(f"n_samples must be positive, got {self.n_samples}")
        if self.burn_in < 0:
            raise InvalidParameterError(f"burn_in can't be negative, got {self.burn_in}")
        if self.thinning < 1:
            raise InvalidParameterError(f"thinning must be at least 1, got {self.thinning}")
        if not (0 <= self.seed < MAX_SEED):
            raise InvalidParameterError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    @property
    def total_sweeps(self) -> int:
        return self.burn_in + self.n_samples * self.thinning


def sample_standard_subbotin(nu: Union[ShapeParam, int], rng: np.random.Generator,
                             size: Optional[Union[int, Tuple[int, ...]]] = None):
    # S * G^(1/nu) with G ~ Gamma(1/nu, 1) and S a fair sign has density proportional to exp(-|x|^nu)
    nu = as_shape(nu).nu
    magnitude = rng.gamma(1.0 / nu, 1.0, size) ** (1.0 / nu)
    sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
    draw = sign * magnitude
    return float(draw) if size is None else draw


def gibbs_sample(theta: ParamMatrix, nu: Union[ShapeParam, int], config: GibbsConfig) -> Dataset:
    """Purpose: draws a dataset from the joint Subbotin graphical model by systematic-scan Gibbs sampling.

    Each sweep updates nodes 0..p-1 in order from their node-wise conditionals
    x_i = location_i(x_-i) + scale_i * S, with S a standard Subbotin draw.

    Args:
        theta: a normalizable parameter matrix.
        nu: shape parameter.
        config: sample count, burn-in, thinning and seed/chain.

    returns:
        (Dataset) n_samples unstandardized rows.

    Raises:
        NormalizabilityError: theta is not positive definite.
    """
    nu = as_shape(nu)
    if not check_normalizable(theta):
        raise NormalizabilityError("refusing to sample: theta is not positive definite")
    logger.debug("gibbs: p=%d nu=%d burn_in=%d thinning=%d n=%d", theta.p, nu.nu, config.burn_in,
                 config.thinning, config.n_samples)

    p = theta.p
    scale = 1.0 / theta.diagonal
    # row i holds theta_ij / theta_ii with a zero diagonal, so x[i] itself never enters its own update
    location_weights = theta.conditional_weights() * scale[:, None]
    rng = make_rng(config.seed, config.chain)

    x = np.zeros(p)
    out = np.empty((config.n_samples, p))
    kept = 0
    sweep = 0
    while kept < config.n_samples:
        chunk = min(_NOISE_CHUNK, config.total_sweeps - sweep)
        noise = sample_standard_subbotin(nu, rng, size=(chunk, p)) * scale
        for s in range(chunk):
            for i in range(p):
                x[i] = location_weights[i] @ x + noise[s, i]
            sweep += 1
            if sweep > config.burn_in and (sweep - config.burn_in) % config.thinning == 0:
                out[kept] = x
                kept += 1
    return Dataset(out)
