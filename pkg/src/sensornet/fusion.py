"""Online sensor fusion by exponential weighting over base sensors and
parametric families of synthesized sensors.

Losses are in bits; the learning rate and the regret bound use natural
logarithms, matching the exponential weights ``exp(-eta * L)``.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError

HAMMING = "hamming"
LOG_LOSS = "log-loss"


@dataclass(frozen=True)
class LossFunction:
    kind: str = HAMMING
    clamp_delta: float = 1e-3

    def __post_init__(self):
        if self.kind not in (HAMMING, LOG_LOSS):
            raise ValidationError(f"unknown loss {self.kind!r}")
        if self.kind == LOG_LOSS and not 0.0 < self.clamp_delta < 0.5:
            raise ValidationError("clamp_delta must lie in (0, 0.5)")

    @property
    def d_max(self) -> float:
        if self.kind == HAMMING:
            return 1.0
        return -math.log2(self.clamp_delta)

    def __call__(self, p, x):
        return self.evaluate(p, x)

    def evaluate(self, p, x):
        """Loss of prediction(s) ``p`` against bit(s) ``x``; broadcasts."""
        p = np.asarray(p, dtype=float)
        x = np.asarray(x)
        if np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
            raise ValidationError("predictions must lie in [0, 1]")
        if not np.all((x == 0) | (x == 1)):
            raise ValidationError("truth must be bits")
        if self.kind == HAMMING:
            if not np.all((p == 0) | (p == 1)):
                raise ValidationError("Hamming loss needs binary predictions; quantize first")
            out = (p != x).astype(float)
        else:
            pc = np.clip(p, self.clamp_delta, 1.0 - self.clamp_delta)
            out = -np.where(x == 1, np.log2(pc), np.log2(1.0 - pc))
        return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- families

PAIR_AVERAGE = "pair-average"
ORDERED_PAIRS = "ordered-pairs"
MAX_OF_SUBSET = "max-of-subset"
MEDIAN_OF_SUBSET = "median-of-subset"
FAMILY_KINDS = (PAIR_AVERAGE, ORDERED_PAIRS, MAX_OF_SUBSET, MEDIAN_OF_SUBSET)


@dataclass(frozen=True)
class SynthesizedFamily:
    """Members are pointwise functions of base sensors; ``params`` holds
    1-based base-sensor tuples in lexicographic order."""

    kind: str
    base_count: int
    params: tuple[tuple[int, ...], ...]

    def __len__(self):
        return len(self.params)

    def names(self) -> list[str]:
        tag = {PAIR_AVERAGE: "avg", ORDERED_PAIRS: "avg", MAX_OF_SUBSET: "max", MEDIAN_OF_SUBSET: "med"}[self.kind]
        return [f"{tag}({','.join(map(str, p))})" for p in self.params]

    def evaluate(self, base: np.ndarray) -> np.ndarray:
        """Member outputs, ``len(self) x n`` for a ``K x n`` base grid (or
        ``len(self)`` for a single column)."""
        base = np.asarray(base, dtype=float)
        if base.shape[0] != self.base_count:
            raise ValidationError(f"family expects {self.base_count} base sensors, got {base.shape[0]}")
        idx = np.asarray(self.params, dtype=np.int64) - 1
        picked = base[idx]  # |Theta| x m (x n)
        if self.kind in (PAIR_AVERAGE, ORDERED_PAIRS):
            return picked.mean(axis=1)
        if self.kind == MAX_OF_SUBSET:
            return picked.max(axis=1)
        return np.median(picked, axis=1)


def build_family(kind: str, base_count: int, subset_size: int | None = None) -> SynthesizedFamily:
    if kind not in FAMILY_KINDS:
        raise ValidationError(f"unknown family {kind!r}; choose from {', '.join(FAMILY_KINDS)}")
    if base_count < 1:
        raise ValidationError("need at least one base sensor")
    ids = range(1, base_count + 1)
    if kind == PAIR_AVERAGE:
        params = itertools.combinations(ids, 2)
    elif kind == ORDERED_PAIRS:
        params = itertools.product(ids, repeat=2)
    else:
        if subset_size is None:
            raise ValidationError(f"{kind} needs a subset size m")
        if not 1 <= subset_size <= base_count:
            raise ValidationError(f"subset size m={subset_size} must lie in [1, K={base_count}]")
        params = itertools.combinations(ids, subset_size)
    return SynthesizedFamily(kind, base_count, tuple(params))


def parse_family(spec: str, base_count: int) -> SynthesizedFamily:
    """``pair-average``, ``ordered-pairs``, ``max:m`` or ``median:m``."""
    if spec in (PAIR_AVERAGE, ORDERED_PAIRS):
        return build_family(spec, base_count)
    name, _, m = spec.partition(":")
    kinds = {"max": MAX_OF_SUBSET, "median": MEDIAN_OF_SUBSET}
    if name not in kinds or not m.isdigit():
        raise ValidationError(f"bad family spec {spec!r}; expected pair-average, ordered-pairs, max:m or median:m")
    return build_family(kinds[name], base_count, int(m))


def competitor_grid(base: np.ndarray, families: Sequence[SynthesizedFamily] = ()) -> tuple[np.ndarray, list[str]]:
    """Stack base sensors and every family member into one ``M x n`` grid."""
    base = np.asarray(base, dtype=float)
    names = [f"s{i}" for i in range(1, base.shape[0] + 1)]
    grids = [base]
    for fam in families:
        grids.append(fam.evaluate(base))
        names += fam.names()
    return np.vstack(grids), names


# ---------------------------------------------------------------- OnlineFusion

def default_eta(num_competitors: int, n: int, d_max: float) -> float:
    """``sqrt(8 ln M / (n d_max^2))``, the rate minimizing the regret bound."""
    if num_competitors < 2 or n < 1 or not d_max > 0:
        raise ValidationError("need M >= 2, n >= 1 and d_max > 0")
    return math.sqrt(8.0 * math.log(num_competitors) / (n * d_max**2))


def regret_bound(num_competitors: int, n: int, d_max: float) -> float:
    """Per-step expected regret bound ``d_max sqrt(ln M / (2n))``."""
    if num_competitors < 2 or n < 1:
        raise ValidationError("need M >= 2 and n >= 1")
    return d_max * math.sqrt(math.log(num_competitors) / (2.0 * n))


def exponential_weights(cum_loss: np.ndarray, eta: float) -> np.ndarray:
    """``exp(-eta L_j) / W`` along the last axis, shifted for stability."""
    z = -eta * (cum_loss - cum_loss.min(axis=-1, keepdims=True))
    w = np.exp(z)
    return w / w.sum(axis=-1, keepdims=True)


@dataclass
class FusionRun:
    num_competitors: int
    n: int
    eta: float
    d_max: float
    loss_kind: str
    chosen: np.ndarray
    algorithm_loss: float
    expected_loss: float
    per_competitor_loss: np.ndarray
    regret: float
    regret_bound: float
    final_weights: np.ndarray
    weight_history: np.ndarray | None = None
    names: list[str] = field(default_factory=list)
    doubling: bool = False

    @property
    def best_competitor(self) -> int:
        return int(np.argmin(self.per_competitor_loss))

    def top(self, count: int = 2) -> list[int]:
        """Indices of the ``count`` heaviest competitors at the end of the run."""
        return [int(i) for i in np.argsort(-self.final_weights, kind="stable")[:count]]

    def to_dict(self) -> dict:
        names = self.names or [str(i) for i in range(self.num_competitors)]
        return {
            "num_competitors": self.num_competitors,
            "n": self.n,
            "eta": self.eta,
            "d_max": self.d_max,
            "loss": self.loss_kind,
            "doubling": self.doubling,
            "algorithm_loss": self.algorithm_loss,
            "expected_loss": self.expected_loss,
            "normalized_algorithm_loss": self.algorithm_loss / self.n,
            "best_competitor": names[self.best_competitor],
            "best_competitor_loss": float(self.per_competitor_loss.min()),
            "regret": self.regret,
            "regret_bound": self.regret_bound,
            "top_weights": [
                {"competitor": names[i], "weight": float(self.final_weights[i])} for i in self.top(5)
            ],
            "competitors": names,
            "per_competitor_loss": [float(v) for v in self.per_competitor_loss],
            "final_weights": [float(v) for v in self.final_weights],
            "chosen": [int(c) for c in self.chosen],
        }

    def weights_csv(self, stride: int = 1) -> str:
        if self.weight_history is None:
            raise ValidationError("run was made without recording weights")
        names = self.names or [str(i) for i in range(self.num_competitors)]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + names)
        rows = range(0, self.weight_history.shape[0], max(1, stride))
        for t in rows:
            w.writerow([t] + [repr(float(v)) for v in self.weight_history[t]])
        return buf.getvalue()


def _validate_run_inputs(outputs, truth, eta):
    outputs = np.asarray(outputs, dtype=float)
    truth = np.asarray(truth)
    if outputs.ndim != 2:
        raise ValidationError("competitor outputs must be an M x n grid")
    if truth.ndim != 1 or truth.shape[0] != outputs.shape[1]:
        raise ValidationError(
            f"truth length {truth.shape} does not match {outputs.shape[1]} time steps"
        )
    if outputs.shape[0] < 2:
        raise ValidationError("need at least two competitors")
    if eta is not None and not eta > 0:
        raise ValidationError("eta must be positive")
    return outputs, truth.astype(np.int64)


def _block_lengths(n: int) -> list[int]:
    out, size, used = [], 1, 0
    while used < n:
        b = min(size, n - used)
        out.append(b)
        used += b
        size *= 2
    return out


def online_fusion(
    competitor_outputs,
    truth,
    loss: LossFunction,
    eta: float | None = None,
    seed: int = 0,
    doubling: bool = False,
    record_weights: bool = True,
    names: Sequence[str] | None = None,
) -> FusionRun:
    """Run exponential weighting over the rows of ``competitor_outputs``.

    Step t samples a competitor from the weights formed by the losses of
    steps 1..t-1 (uniform at t = 1), charges the algorithm that competitor's
    loss, then charges every competitor its own loss.  ``eta=None`` uses
    :func:`default_eta`.  With ``doubling`` the horizon is split into blocks
    of length 1, 2, 4, ... and the weights restart in each block with the
    block's own default rate.
    """
    outputs, truth = _validate_run_inputs(competitor_outputs, truth, eta)
    m, n = outputs.shape
    step_loss = loss.evaluate(outputs, truth[None, :])

    used_eta = eta if eta is not None else default_eta(m, n, loss.d_max)
    blocks = _block_lengths(n) if doubling else [n]
    parts, start = [], 0
    for b in blocks:
        rate = used_eta if (eta is not None or not doubling) else default_eta(m, b, loss.d_max)
        # row t-1 of cum = losses through step t of the block
        cum = np.cumsum(step_loss[:, start:start + b], axis=1).T
        parts.append(np.vstack([np.full((1, m), 1.0 / m), exponential_weights(cum, rate)]))
        start += b
    # each block's last row is superseded by the next block's uniform restart
    history = np.vstack([p[:-1] for p in parts] + [parts[-1][-1:]])
    if doubling:
        bound = sum(loss.d_max * math.sqrt(b * math.log(m) / 2.0) for b in blocks) / n
    else:
        bound = regret_bound(m, n, loss.d_max)

    acting = history[:-1]  # row t-1 drives step t
    u = np.random.default_rng(seed).random(n)
    cdf = np.cumsum(acting, axis=1)
    chosen = np.minimum((cdf < (u * cdf[:, -1])[:, None]).sum(axis=1), m - 1)

    t_idx = np.arange(n)
    algorithm_loss = float(step_loss[chosen, t_idx].sum())
    expected_loss = float((acting * step_loss.T).sum())
    per_comp = step_loss.sum(axis=1)
    final = history[-1].copy()
    return FusionRun(
        num_competitors=m,
        n=n,
        eta=used_eta,
        d_max=loss.d_max,
        loss_kind=loss.kind,
        chosen=chosen,
        algorithm_loss=algorithm_loss,
        expected_loss=expected_loss,
        per_competitor_loss=per_comp,
        regret=(algorithm_loss - float(per_comp.min())) / n,
        regret_bound=bound,
        final_weights=final,
        weight_history=history if record_weights else None,
        names=list(names) if names is not None else [],
        doubling=doubling,
    )


def online_fusion_stream(
    base_outputs,
    families: Sequence[SynthesizedFamily],
    truth,
    loss: LossFunction,
    eta: float | None = None,
    seed: int = 0,
    record_weights: bool = False,
) -> FusionRun:
    """Step-by-step variant that expands synthesized members one time step
    at a time, so the ``M x n`` competitor grid is never materialized.

    Draws the same random stream as :func:`online_fusion`, so both give the
    same run for the same inputs and seed.
    """
    base = np.asarray(base_outputs, dtype=float)
    truth = np.asarray(truth).astype(np.int64)
    if base.ndim != 2 or truth.shape != (base.shape[1],):
        raise ValidationError("base outputs must be K x n with a length-n truth")
    k, n = base.shape
    names = [f"s{i}" for i in range(1, k + 1)]
    for fam in families:
        names += fam.names()
    m = len(names)
    if m < 2:
        raise ValidationError("need at least two competitors")
    if eta is not None and not eta > 0:
        raise ValidationError("eta must be positive")
    rate = eta if eta is not None else default_eta(m, n, loss.d_max)

    rng = np.random.default_rng(seed)
    u = rng.random(n)
    cum = np.zeros(m)
    weights = np.full(m, 1.0 / m)
    history = [weights.copy()] if record_weights else None
    chosen = np.empty(n, dtype=np.int64)
    algorithm_loss = expected_loss = 0.0
    for t in range(n):
        column = np.concatenate([base[:, t]] + [fam.evaluate(base[:, t]) for fam in families])
        d = loss.evaluate(column, truth[t])
        cdf = np.cumsum(weights)
        j = min(int((cdf < u[t] * cdf[-1]).sum()), m - 1)
        chosen[t] = j
        algorithm_loss += float(d[j])
        expected_loss += float(weights @ d)
        cum += d
        weights = exponential_weights(cum, rate)
        if record_weights:
            history.append(weights.copy())
    return FusionRun(
        num_competitors=m,
        n=n,
        eta=rate,
        d_max=loss.d_max,
        loss_kind=loss.kind,
        chosen=chosen,
        algorithm_loss=algorithm_loss,
        expected_loss=expected_loss,
        per_competitor_loss=cum,
        regret=(algorithm_loss - float(cum.min())) / n,
        regret_bound=regret_bound(m, n, loss.d_max),
        final_weights=weights,
        weight_history=np.vstack(history) if record_weights else None,
        names=names,
    )


def alternating_trap_truth(outputs, loss: LossFunction, eta: float) -> np.ndarray:
    """Deterministic adversary: at each step pick the bit that maximizes the
    algorithm's expected loss under its current weights (ties alternate)."""
    outputs = np.asarray(outputs, dtype=float)
    m, n = outputs.shape
    cum = np.zeros(m)
    truth = np.empty(n, dtype=np.int64)
    last = 1
    for t in range(n):
        w = exponential_weights(cum, eta)
        d0 = loss.evaluate(outputs[:, t], 0)
        d1 = loss.evaluate(outputs[:, t], 1)
        e0, e1 = float(w @ d0), float(w @ d1)
        if abs(e0 - e1) <= 1e-12:
            x = 1 - last
        else:
            x = 0 if e0 > e1 else 1
        truth[t] = x
        last = x
        cum += d0 if x == 0 else d1
    return truth
