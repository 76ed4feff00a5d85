"""Block-error model for repeated packet transmissions over i.i.d. block fading."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BlepModel:
    """Per-attempt and cumulative block error probabilities.

    ``eps`` is the first-attempt BLEP, ``g`` the combining-gain exponent and
    ``max_attempts`` the largest attempt index the model answers for.  The
    conditional failure probability of attempt ``m`` (given attempts
    ``1..m-1`` failed) is ``eps ** (g ** (m - 1))``; the cumulative BLEP after
    ``m`` attempts is the product of the conditionals, so ``g = 1`` gives plain
    ARQ (``eps ** m``) and ``g > 1`` models soft combining.
    """

    eps: float
    g: float = 1.0
    max_attempts: int = 1

    def __post_init__(self):
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError(f"eps must lie in [0, 1], got {self.eps}")
        if not self.g >= 1.0:
            raise ValueError(f"combining gain g must be >= 1, got {self.g}")
        if int(self.max_attempts) != self.max_attempts or self.max_attempts < 1:
            raise ValueError(f"max_attempts must be a positive integer, got {self.max_attempts}")

    def _check(self, m: int, lowest: int) -> None:
        if not lowest <= m <= self.max_attempts:
            raise ValueError(f"attempt index {m} outside [{lowest}, {self.max_attempts}]")

    def _log_exponent(self, m: int) -> float:
        # sum_{k=0}^{m-1} g^k
        if self.g == 1.0:
            return float(m)
        return math.expm1(m * math.log(self.g)) / (self.g - 1.0)

    def conditional_attempt_blep(self, m: int) -> float:
        """Probability that attempt ``m`` fails given all earlier attempts failed."""
        self._check(m, 1)
        if self.eps in (0.0, 1.0):
            return self.eps
        return math.exp(self.g ** (m - 1) * math.log(self.eps))

    def cumulative_blep(self, m: int) -> float:
        """Probability that none of the first ``m`` attempts decodes; 1 for ``m = 0``."""
        self._check(m, 0)
        if m == 0:
            return 1.0
        if self.eps in (0.0, 1.0):
            return self.eps
        return math.exp(self._log_exponent(m) * math.log(self.eps))

    def conditional_table(self) -> np.ndarray:
        """Conditional BLEPs indexed by attempt, with a dummy entry at index 0."""
        q = np.ones(self.max_attempts + 1)
        for m in range(1, self.max_attempts + 1):
            q[m] = self.conditional_attempt_blep(m)
        return q

    def cumulative_table(self) -> np.ndarray:
        return np.array([self.cumulative_blep(m) for m in range(self.max_attempts + 1)])

    def sample_decode(self, attempt_index: int, rng: np.random.Generator) -> bool:
        """Draw one uniform and report whether this attempt decodes the packet."""
        return bool(rng.random() >= self.conditional_attempt_blep(attempt_index))


def conditional_attempt_blep(model: BlepModel, m: int) -> float:
    return model.conditional_attempt_blep(m)


def cumulative_blep(model: BlepModel, m: int) -> float:
    return model.cumulative_blep(m)


def sample_decode(model: BlepModel, attempt_index: int, rng: np.random.Generator) -> bool:
    return model.sample_decode(attempt_index, rng)
