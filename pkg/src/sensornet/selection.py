"""Sensor subset selection: Bernoulli random selection with its guarantee
calculator, and threshold greedy selection over a pluggable entropy oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .data import SensorMatrix, format_members, members, popcount, project_subset
from .empirical import EntropyVector, entropy_bits, joint_type
from .errors import SensorNetError, ValidationError
from .lz78 import lz_entropy_estimate


class OracleQueryError(SensorNetError):
    def __init__(self, mask: int, cause: Exception):
        super().__init__(f"entropy oracle failed on {format_members(mask)}: {cause}")
        self.mask = mask
        self.__cause__ = cause


class EntropyOracle:
    """Deterministic, memoized map from subset mask to entropy in bits.

    ``evaluation_count`` counts backend evaluations; ``query_count`` counts
    every call, cached or not.
    """

    def __init__(self, fn: Callable[[int], float], num_sensors: int, name: str = "custom"):
        self._fn = fn
        self.num_sensors = num_sensors
        self.name = name
        self._cache: dict[int, float] = {}
        self.evaluation_count = 0
        self.query_count = 0

    def __call__(self, mask: int) -> float:
        self.query_count += 1
        if mask == 0:
            return 0.0
        try:
            return self._cache[mask]
        except KeyError:
            pass
        try:
            value = float(self._fn(mask))
        except Exception as exc:
            raise OracleQueryError(mask, exc) from exc
        self.evaluation_count += 1
        self._cache[mask] = value
        return value

    def as_vector(self, kind: str) -> EntropyVector:
        return EntropyVector(self.num_sensors, kind, dict(self._cache))

    @classmethod
    def from_vector(cls, vec: EntropyVector) -> "EntropyOracle":
        return cls(vec.__getitem__, vec.num_sensors, name=vec.kind)

    @classmethod
    def empirical(cls, matrix: SensorMatrix) -> "EntropyOracle":
        return cls(lambda m: entropy_bits(joint_type(matrix, m)), matrix.num_sensors, name="empirical")

    @classmethod
    def lz(cls, matrix: SensorMatrix) -> "EntropyOracle":
        def fn(mask):
            seq, product = project_subset(matrix, mask)
            return lz_entropy_estimate(seq, product)

        return cls(fn, matrix.num_sensors, name="lz")


# ---------------------------------------------------------------- random

def random_selection(k: int, q: float, seed: int) -> int:
    """Include each of ``k`` sensors independently with probability ``q``."""
    if not 0.0 <= q <= 1.0:
        raise ValidationError(f"q must lie in [0, 1], got {q}")
    draws = np.random.default_rng(seed).random(k) < q
    return sum(1 << i for i in np.flatnonzero(draws).tolist())


@dataclass(frozen=True)
class SelectionGuarantee:
    probability_floor: float
    required_disjoint_bases: float
    order_term: float
    note: str = (
        "success probability is at least probability_floor - O(order_term); "
        "the constant of the order term is unknown"
    )


def random_selection_guarantee(a: float, q: float, r: float, k: int, n: int) -> SelectionGuarantee:
    """If the true matroid of rank ``r`` holds ``a + 2 + ln(r) / q`` disjoint
    bases, a q-draw contains a base with probability >= 1 - exp(-a q) minus
    an O((2^k - 1)/sqrt(n)) estimation term."""
    if not a > 0:
        raise ValidationError("a must be positive")
    if not 0.0 < q <= 1.0:
        raise ValidationError(f"q must lie in (0, 1], got {q}")
    if r < 1:
        raise ValidationError("rank must be at least 1")
    return SelectionGuarantee(
        probability_floor=1.0 - math.exp(-a * q),
        required_disjoint_bases=a + 2.0 + math.log(r) / q,
        order_term=((1 << k) - 1) / math.sqrt(n) if n > 0 else math.inf,
    )


def base_containment_probability(rank: Callable[[int], float], k: int, q: float, tol: float = 1e-9) -> float:
    """Exact probability that a q-draw over ``k`` sensors has full rank,
    by enumerating all 2^k masks."""
    full = rank((1 << k) - 1)
    total = 0.0
    for mask in range(1 << k):
        if rank(mask) >= full - tol:
            s = popcount(mask)
            total += q**s * (1.0 - q) ** (k - s)
    return total


# ---------------------------------------------------------------- greedy

@dataclass(frozen=True)
class GreedyStep:
    sensor: int
    entropy: float
    gain: float


@dataclass
class GreedyTrace:
    steps: list[GreedyStep] = field(default_factory=list)
    final_subset: int = 0
    stopped_early: bool = False
    epsilon: float = 0.0
    residual_bound: float = 0.0
    # best candidate gain when the loop stopped; None when every sensor was taken
    last_best_gain: float | None = None

    @property
    def entropy(self) -> float:
        return self.steps[-1].entropy if self.steps else 0.0

    def value_at(self, m: int) -> float:
        """Entropy after the first ``m`` accepted steps (plateau past the stop)."""
        if m <= 0 or not self.steps:
            return 0.0
        return self.steps[min(m, len(self.steps)) - 1].entropy

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "final_subset": self.final_subset,
            "final_members": list(members(self.final_subset)),
            "entropy": self.entropy,
            "stopped_early": self.stopped_early,
            "last_best_gain": self.last_best_gain,
            "residual_bound": self.residual_bound,
            "residual_caveat": EARLY_STOP_CAVEAT,
            "steps": [{"sensor": s.sensor, "entropy": s.entropy, "gain": s.gain} for s in self.steps],
        }


EARLY_STOP_CAVEAT = "bound excludes a vanishing estimation term; exact only for analytic oracles"


def greedy_selection(oracle: Callable[[int], float], k: int, epsilon: float = 0.0, executor=None) -> GreedyTrace:
    """Grow a subset from the empty set, each time adding the sensor that
    maximizes the oracle; accept only if the entropy rises by more than
    ``epsilon``.  Ties go to the lowest sensor index.

    ``executor`` (a concurrent.futures executor) fans out the candidate
    evaluations of each step.
    """
    if epsilon < 0:
        raise ValidationError("epsilon must be non-negative")
    trace = GreedyTrace(epsilon=epsilon, residual_bound=early_stop_gap(k, epsilon))
    current, h_hat = 0, 0.0
    while True:
        candidates = [j for j in range(1, k + 1) if not current >> (j - 1) & 1]
        if not candidates:
            trace.last_best_gain = None
            break
        masks = [current | (1 << (j - 1)) for j in candidates]
        if executor is not None:
            values = list(executor.map(oracle, masks))
        else:
            values = [oracle(m) for m in masks]
        best = 0
        for idx in range(1, len(values)):
            if values[idx] > values[best]:
                best = idx
        gain = values[best] - h_hat
        if values[best] > h_hat + epsilon:
            current = masks[best]
            h_hat = values[best]
            trace.steps.append(GreedyStep(candidates[best], h_hat, gain))
            continue
        trace.last_best_gain = gain
        trace.stopped_early = gain > 0
        break
    trace.final_subset = current
    return trace


def early_stop_gap(k: int, epsilon: float) -> float:
    """Upper bound ``k * epsilon`` on the entropy left on the table by
    stopping at the first step gaining no more than ``epsilon``."""
    if epsilon < 0:
        raise ValidationError("epsilon must be non-negative")
    return k * epsilon


def sized_random_draws(k: int, q: float, size: int, trials: int, seed: int, max_attempts: int = 1_000_000):
    """Collect ``trials`` random selections of exactly ``size`` sensors by
    rerunning :func:`random_selection` with seeds ``seed, seed + 1, ...``.

    Returns (seed, mask) pairs.
    """
    if not 0 <= size <= k:
        raise ValidationError(f"size must lie in [0, {k}]")
    if (q == 0.0 and size > 0) or (q == 1.0 and size < k):
        raise ValidationError(f"q={q} can never produce a draw of size {size}")
    out = []
    s = seed
    while len(out) < trials:
        if s - seed >= max_attempts:
            raise ValidationError(f"no draw of size {size} within {max_attempts} attempts")
        mask = random_selection(k, q, s)
        if popcount(mask) == size:
            out.append((s, mask))
        s += 1
    return out
