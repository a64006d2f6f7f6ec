"""Density learners for the trapdoor class: one non-private, two (eps, delta)-DP baselines.

Every learner takes the public class weight ``w`` and returns a
:class:`LearnReport` whose estimate is a member of ``H_{w,d}``.
"""

from __future__ import annotations

import contextlib
import math
import os
from dataclasses import dataclass
from typing import Callable, Iterator, Union

import numpy as np

from trapdoor.distributions import Dataset, Seed, TrapdoorParams
from trapdoor.errors import ConfigError, ContractError
from trapdoor.reductions import ProductDataset, extract_parameters, lift_product_samples

#: Constant in front of ``ln(4/beta) / alpha^2`` for the key-sample target.
KEY_SAMPLE_CONSTANT = 8

NOISE_OFF_ENV = "TRAPDOOR_NOISE_OFF"
_noise_off = False


@contextlib.contextmanager
def noise_disabled() -> Iterator[None]:
    """Test hook: run the DP learners with their Gaussian noise replaced by zeros.

    Also enabled for the whole process by setting ``TRAPDOOR_NOISE_OFF=1``.
    Outputs produced under this hook are not private.
    """
    global _noise_off
    previous, _noise_off = _noise_off, True
    try:
        yield
    finally:
        _noise_off = previous


def _noise_enabled() -> bool:
    return not (_noise_off or os.environ.get(NOISE_OFF_ENV) == "1")


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    delta: float

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon <= 1.0:
            raise ContractError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if not 0.0 < self.delta < 1.0:
            raise ContractError(f"delta must lie in (0, 1), got {self.delta}")


@dataclass(frozen=True)
class LearnReport:
    """Learner output plus the bookkeeping the experiments record."""

    estimate: TrapdoorParams
    inferred_d: int
    key_count: int
    fallback_used: bool

    def __post_init__(self) -> None:
        if self.inferred_d != self.estimate.d:
            raise ContractError("inferred_d must equal the estimate's dimension")


def gaussian_sigma(sensitivity: float, epsilon: float, delta: float) -> float:
    """Noise scale of the classical Gaussian mechanism for (epsilon, delta)-DP."""
    return sensitivity * math.sqrt(2.0 * math.log(1.25 / delta)) / epsilon


# --------------------------------------------------------------------------
# Non-private learner
# --------------------------------------------------------------------------


def required_key_samples(alpha: float, beta: float) -> int:
    """Key samples ``m`` needed so the key mean is accurate enough w.p. ``1 - beta/2``."""
    _check_alpha_beta(alpha, beta)
    return math.ceil(KEY_SAMPLE_CONSTANT * math.log(4.0 / beta) / alpha**2)


def required_samples_nonprivate(alpha: float, beta: float) -> int:
    """Total sample size for the non-private learner at TV error ``alpha``, failure ``beta``.

    With class weight ``alpha / 2`` this many samples contain at least
    :func:`required_key_samples` key samples except with probability ``beta / 2``
    (Hoeffding). Grows like ``log(1/beta) / alpha^3`` and does not depend on ``d``.
    """
    m = required_key_samples(alpha, beta)
    return math.ceil(2.0 * (2.0 * alpha * m + math.log(2.0 / beta)) / alpha**2)


def _check_alpha_beta(alpha: float, beta: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ContractError(f"alpha must lie in (0, 1), got {alpha}")
    if not 0.0 < beta < 1.0:
        raise ContractError(f"beta must lie in (0, 1), got {beta}")


def _hard_frequencies(plus: np.ndarray, minus: np.ndarray) -> np.ndarray:
    plus = np.asarray(plus, dtype=float)
    total = plus + np.asarray(minus, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        p_hat = np.where(total > 0, plus / total, 0.5)
    return np.clip(p_hat, 0.0, 1.0)


def learn_nonprivate(data: Dataset, w: float) -> LearnReport:
    """Infer ``d`` from the samples and estimate ``p`` by the mean of the key samples.

    Without any key sample, ``d`` falls back to the largest hard index seen
    (at least 2) and ``p`` to per-coordinate hard-sample frequencies, with 1/2
    for coordinates never observed. The report flags this case.
    """
    if len(data) == 0:
        raise ContractError("cannot learn from an empty dataset")
    keys = data.key_bits
    if keys.shape[0] > 0:
        d = data.d
        p_hat = keys.mean(axis=0, dtype=float)
        fallback = False
    else:
        d = max(2, int(np.abs(data.hard).max()))
        plus, minus = data.hard_counts()
        p_hat = _hard_frequencies(plus[:d], minus[:d])
        fallback = True
    estimate = TrapdoorParams(w=w, d=d, p=tuple(np.clip(p_hat, 0.0, 1.0)))
    return LearnReport(estimate, d, int(keys.shape[0]), fallback)


# --------------------------------------------------------------------------
# DP baselines
# --------------------------------------------------------------------------


def _gaussian(rng: np.random.Generator, sigma: float, size: int | None = None):
    noise = rng.normal(0.0, sigma, size=size)
    if not _noise_enabled():
        noise = np.zeros_like(noise)
    return noise


def dp_key_sigmas(d: int, budget: PrivacyBudget) -> tuple[float, float]:
    """Noise scales ``(sigma_sums, sigma_count)`` used by :func:`learn_dp_key`.

    Half of ``(epsilon, delta)`` goes to each release. The bit-sum vector has
    l2 sensitivity ``sqrt(d)``, the key count sensitivity 1.
    """
    eps, delta = budget.epsilon / 2.0, budget.delta / 2.0
    return gaussian_sigma(math.sqrt(d), eps, delta), gaussian_sigma(1.0, eps, delta)


def learn_dp_key(data: Dataset, w: float, budget: PrivacyBudget, seed: Seed) -> LearnReport:
    """Gaussian-noised key-sample mean.

    Releases noisy per-coordinate key bit sums and a noisy key count and
    returns their clamped ratio. Error grows with ``d`` through the
    ``sqrt(d)`` sensitivity of the sums.
    """
    if len(data) == 0:
        raise ContractError("cannot learn from an empty dataset")
    d = data.d
    sigma_s, sigma_k = dp_key_sigmas(d, budget)
    keys = data.key_bits
    k = keys.shape[0]
    sums = keys.sum(axis=0, dtype=float)
    rng = np.random.default_rng(seed)
    noisy_sums = sums + _gaussian(rng, sigma_s, d)
    noisy_k = k + float(_gaussian(rng, sigma_k))
    p_hat = np.clip(noisy_sums / max(noisy_k, 1.0), 0.0, 1.0)
    return LearnReport(TrapdoorParams(w=w, d=d, p=tuple(p_hat)), d, int(k), False)


def dp_hard_sigma(budget: PrivacyBudget) -> float:
    # One sample moves at most two of the 2d counts, each by 1.
    return gaussian_sigma(math.sqrt(2.0), budget.epsilon, budget.delta)


def learn_dp_hard(data: Dataset, w: float, budget: PrivacyBudget, seed: Seed) -> LearnReport:
    """Noisy histogram of the hard samples; ignores the key component entirely."""
    if len(data) == 0:
        raise ContractError("cannot learn from an empty dataset")
    d = data.d
    plus, minus = data.hard_counts()
    rng = np.random.default_rng(seed)
    noisy = np.concatenate([plus, minus]).astype(float) + _gaussian(rng, dp_hard_sigma(budget), 2 * d)
    p_hat = _hard_frequencies(noisy[:d], noisy[d:])
    return LearnReport(TrapdoorParams(w=w, d=d, p=tuple(p_hat)), d, 0, False)


# --------------------------------------------------------------------------
# Selection and the product-estimation reduction
# --------------------------------------------------------------------------

LEARNER_IDS = ("nonprivate", "dp-key", "dp-hard")

Learner = Callable[[Dataset], LearnReport]


def make_learner(
    name: str, w: float, budget: PrivacyBudget | None = None, seed: Seed = None
) -> Learner:
    """Bind a learner identifier and its arguments into a ``Dataset -> LearnReport`` callable."""
    if name == "nonprivate":
        return lambda data: learn_nonprivate(data, w)
    if name not in LEARNER_IDS:
        raise ConfigError(f"unknown learner {name!r}; expected one of {', '.join(LEARNER_IDS)}")
    if budget is None:
        raise ContractError(f"learner {name!r} needs a privacy budget")
    fn = learn_dp_key if name == "dp-key" else learn_dp_hard
    return lambda data: fn(data, w, budget, seed)


def reduce_then_estimate(
    x: ProductDataset,
    w: float,
    learner: Callable[[Dataset], Union[LearnReport, TrapdoorParams]],
    seed: Seed,
) -> np.ndarray:
    """Estimate the mean of a binary product distribution with a trapdoor density learner.

    The rows are lifted to trapdoor samples with weight ``w``, the learner
    runs on the lifted data, and the probability vector of its output is
    returned. Neighbouring inputs lift to neighbouring inputs and extraction
    is post-processing, so a DP learner yields a DP estimator.
    """
    out = learner(lift_product_samples(x, w, seed))
    if isinstance(out, LearnReport):
        out = out.estimate
    return extract_parameters(out)
