"""Synthetic sensor ensembles with known dependence structure.

A :class:`SourceSpec` declares base sources (i.i.d. or stationary Markov)
followed by derived sensors that are functions of earlier declarations.
Sensors are numbered 1.. in declaration order; ``order`` optionally
permutes them into output columns.

Also hosts the real-valued observer scenarios used by the fusion
experiments.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .data import AlphabetSpec, SensorMatrix, all_masks, members
from .empirical import ANALYTIC, EntropyVector, entropy_from_counts
from .errors import InputFormatError, ValidationError

STOCHASTIC_TOL = 1e-12


# ---------------------------------------------------------------- declarations

@dataclass(frozen=True)
class IID:
    probs: tuple[float, ...]


@dataclass(frozen=True)
class Markov:
    transition: tuple[tuple[float, ...], ...]


@dataclass(frozen=True)
class Copy:
    of: int


@dataclass(frozen=True)
class Xor:
    """Symbol-wise sum modulo the alphabet size (XOR for bits)."""

    of: tuple[int, ...]


@dataclass(frozen=True)
class Delay:
    of: int
    lag: int


@dataclass(frozen=True)
class NoisyCopy:
    """Copy that, with probability ``flip``, is shifted to a uniformly chosen other symbol."""

    of: int
    flip: float


@dataclass(frozen=True)
class Function:
    """Lookup table indexed by the product symbol of ``of`` (first listed
    sensor is the least significant digit)."""

    of: tuple[int, ...]
    table: tuple[int, ...]


Base = Union[IID, Markov]
Derived = Union[Copy, Xor, Delay, NoisyCopy, Function]


def _refs(d: Derived) -> tuple[int, ...]:
    return d.of if isinstance(d.of, tuple) else (d.of,)


@dataclass(frozen=True)
class SourceSpec:
    base_sources: tuple[Base, ...]
    derived_sensors: tuple[Derived, ...] = ()
    seed: int = 0
    alphabet: int = 2
    order: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "base_sources", tuple(self.base_sources))
        object.__setattr__(self, "derived_sensors", tuple(self.derived_sensors))
        if self.order is not None:
            object.__setattr__(self, "order", tuple(self.order))
        self.validate()

    @property
    def num_sensors(self) -> int:
        return len(self.base_sources) + len(self.derived_sensors)

    @property
    def max_lag(self) -> int:
        return max((d.lag for d in self.derived_sensors if isinstance(d, Delay)), default=0)

    @property
    def memoryless(self) -> bool:
        return all(isinstance(b, IID) for b in self.base_sources) and not any(
            isinstance(d, Delay) for d in self.derived_sensors
        )

    def validate(self) -> None:
        a = self.alphabet
        if int(a) != a or a < 2:
            raise ValidationError("alphabet must be an integer >= 2")
        if not self.base_sources:
            raise ValidationError("need at least one base source")
        for pos, b in enumerate(self.base_sources, start=1):
            if isinstance(b, IID):
                _check_probs(b.probs, a, f"base {pos}")
            elif isinstance(b, Markov):
                _check_transition(b.transition, a, f"base {pos}")
            else:
                raise ValidationError(f"base {pos}: unknown source {b!r}")
        nb = len(self.base_sources)
        for pos, d in enumerate(self.derived_sensors, start=nb + 1):
            for r in _refs(d):
                if not 1 <= r < pos:
                    raise ValidationError(
                        f"sensor {pos} references sensor {r}; derived sensors may only use earlier declarations"
                    )
            if isinstance(d, Delay) and d.lag < 1:
                raise ValidationError(f"sensor {pos}: lag must be >= 1")
            if isinstance(d, NoisyCopy) and not 0.0 <= d.flip <= 1.0:
                raise ValidationError(f"sensor {pos}: flip probability outside [0, 1]")
            if isinstance(d, Xor) and len(d.of) < 2:
                raise ValidationError(f"sensor {pos}: xor needs at least two inputs")
            if isinstance(d, Function):
                if len(d.table) != a ** len(d.of):
                    raise ValidationError(f"sensor {pos}: lookup table needs {a ** len(d.of)} entries")
                if any(not 0 <= v < a for v in d.table):
                    raise ValidationError(f"sensor {pos}: lookup table value outside the alphabet")
        if self.order is not None and sorted(self.order) != list(range(1, self.num_sensors + 1)):
            raise ValidationError("order must be a permutation of 1..num_sensors")

    # -- JSON
    @classmethod
    def from_dict(cls, doc: dict) -> "SourceSpec":
        try:
            bases = [_base_from_dict(b) for b in doc["base_sources"]]
            derived = [_derived_from_dict(d) for d in doc.get("derived_sensors", [])]
            return cls(
                base_sources=tuple(bases),
                derived_sensors=tuple(derived),
                seed=int(doc.get("seed", 0)),
                alphabet=int(doc.get("alphabet", 2)),
                order=tuple(doc["order"]) if doc.get("order") is not None else None,
            )
        except (KeyError, TypeError) as exc:
            raise InputFormatError(f"malformed source spec: {exc}") from exc

    def to_dict(self) -> dict:
        out = {
            "alphabet": self.alphabet,
            "seed": self.seed,
            "base_sources": [_to_dict(b) for b in self.base_sources],
            "derived_sensors": [_to_dict(d) for d in self.derived_sensors],
        }
        if self.order is not None:
            out["order"] = list(self.order)
        return out


def _check_probs(p, a, where):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or not 1 <= p.size <= a:
        raise ValidationError(f"{where}: probability vector must have 1..{a} entries")
    if (p < 0).any() or abs(p.sum() - 1.0) > STOCHASTIC_TOL:
        raise ValidationError(f"{where}: probabilities must be non-negative and sum to 1")


def _check_transition(P, a, where):
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] > a:
        raise ValidationError(f"{where}: transition matrix must be square with at most {a} states")
    if (P < 0).any() or np.abs(P.sum(axis=1) - 1.0).max() > STOCHASTIC_TOL:
        raise ValidationError(f"{where}: transition matrix is not row-stochastic")


_DERIVED_TYPES = {"copy": Copy, "xor": Xor, "delay": Delay, "noisy-copy": NoisyCopy, "function": Function}


def _base_from_dict(d: dict) -> Base:
    kind = d["type"]
    if kind == "iid":
        return IID(tuple(float(x) for x in d["probs"]))
    if kind == "markov":
        return Markov(tuple(tuple(float(x) for x in row) for row in d["transition"]))
    raise InputFormatError(f"unknown base source type {kind!r}")


def _derived_from_dict(d: dict) -> Derived:
    kind = d["type"]
    if kind == "copy":
        return Copy(int(d["of"]))
    if kind == "xor":
        return Xor(tuple(int(x) for x in d["of"]))
    if kind == "delay":
        return Delay(int(d["of"]), int(d["lag"]))
    if kind == "noisy-copy":
        return NoisyCopy(int(d["of"]), float(d["flip"]))
    if kind == "function":
        return Function(tuple(int(x) for x in d["of"]), tuple(int(x) for x in d["table"]))
    raise InputFormatError(f"unknown derived sensor type {kind!r}")


def _to_dict(x) -> dict:
    if isinstance(x, IID):
        return {"type": "iid", "probs": list(x.probs)}
    if isinstance(x, Markov):
        return {"type": "markov", "transition": [list(r) for r in x.transition]}
    for name, cls in _DERIVED_TYPES.items():
        if isinstance(x, cls):
            out = {"type": name}
            for f in x.__dataclass_fields__:
                v = getattr(x, f)
                out[f] = list(v) if isinstance(v, tuple) else v
            return out
    raise TypeError(x)


def load_spec(path) -> SourceSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"{path}: invalid JSON ({exc})") from exc
    return SourceSpec.from_dict(doc)


# ---------------------------------------------------------------- Markov chains

def _irreducible(P: np.ndarray) -> bool:
    n = P.shape[0]
    adj = P > 0
    for start in range(n):
        seen = {start}
        frontier = [start]
        while frontier:
            i = frontier.pop()
            for j in np.flatnonzero(adj[i]).tolist():
                if j not in seen:
                    seen.add(j)
                    frontier.append(j)
        if len(seen) != n:
            return False
    return True


def stationary_distribution(transition) -> np.ndarray:
    P = np.asarray(transition, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValidationError("transition matrix must be square")
    if (P < 0).any() or np.abs(P.sum(axis=1) - 1.0).max() > STOCHASTIC_TOL:
        raise ValidationError("transition matrix is not row-stochastic")
    if not _irreducible(P):
        raise ValidationError("transition matrix is reducible; the stationary distribution is not unique")
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    pi = np.linalg.solve(A, rhs)
    # polish with a few power steps
    for _ in range(3):
        pi = pi @ P
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def markov_entropy_rate(transition) -> float:
    """Entropy rate in bits/step: sum_i pi_i H(row_i)."""
    P = np.asarray(transition, dtype=float)
    pi = stationary_distribution(P)
    rows = [entropy_from_counts(row) for row in P]
    return float(pi @ np.asarray(rows))


# ---------------------------------------------------------------- generation

def _markov_path(P: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    pi = stationary_distribution(P)
    cdf = np.cumsum(P, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(n)
    state = min(int(np.searchsorted(np.cumsum(pi), u[0], side="right")), P.shape[0] - 1)
    rows = cdf.tolist()
    ul = u.tolist()
    out = [state]
    for t in range(1, n):
        r = rows[state]
        x = ul[t]
        s = 0
        while x >= r[s]:
            s += 1
        state = s
        out.append(s)
    return np.asarray(out, dtype=np.int64)


def generate(spec: SourceSpec, n: int) -> SensorMatrix:
    """Seeded, reproducible realization of ``spec``.  Delayed sensors hold
    symbol 0 for their first ``lag`` steps."""
    if n < spec.max_lag + 1:
        raise ValidationError(f"n={n} is shorter than max lag + 1 = {spec.max_lag + 1}")
    a = spec.alphabet
    rng = np.random.default_rng(spec.seed)
    rows: list[np.ndarray] = []
    for b in spec.base_sources:
        if isinstance(b, IID):
            rows.append(rng.choice(len(b.probs), size=n, p=np.asarray(b.probs)).astype(np.int64))
        else:
            rows.append(_markov_path(np.asarray(b.transition, dtype=float), n, rng))
    for d in spec.derived_sensors:
        if isinstance(d, Copy):
            rows.append(rows[d.of - 1].copy())
        elif isinstance(d, Xor):
            rows.append(sum(rows[i - 1] for i in d.of) % a)
        elif isinstance(d, Delay):
            src = rows[d.of - 1]
            rows.append(np.concatenate([np.zeros(d.lag, dtype=np.int64), src[:-d.lag]]))
        elif isinstance(d, NoisyCopy):
            shift = _noise_shift(rng, d.flip, a, n)
            rows.append((rows[d.of - 1] + shift) % a)
        else:
            code = np.zeros(n, dtype=np.int64)
            place = 1
            for i in d.of:
                code += rows[i - 1] * place
                place *= a
            rows.append(np.asarray(d.table, dtype=np.int64)[code])
    grid = np.vstack(rows)
    if spec.order is not None:
        grid = grid[[i - 1 for i in spec.order]]
    return SensorMatrix(grid, AlphabetSpec(a))


def _noise_shift(rng, flip, a, n):
    flipped = rng.random(n) < flip
    other = rng.integers(1, a, size=n) if a > 2 else np.ones(n, dtype=np.int64)
    return np.where(flipped, other, 0)


# ---------------------------------------------------------------- analytic oracle

def joint_atoms(spec: SourceSpec) -> tuple[np.ndarray, np.ndarray]:
    """Exact joint law of a memoryless spec as (probabilities, outcome rows),
    enumerating every combination of base symbols and noise shifts."""
    if not spec.memoryless:
        raise ValidationError(
            "analytic entropy vectors need i.i.d. bases and memoryless derivations; "
            "use markov_entropy_rate for Markov sources"
        )
    a = spec.alphabet
    factors = []  # (probabilities, values) of each independent random ingredient
    for b in spec.base_sources:
        factors.append(np.asarray(b.probs, dtype=float))
    noise_index = {}
    for pos, d in enumerate(spec.derived_sensors):
        if isinstance(d, NoisyCopy):
            noise_index[pos] = len(factors)
            p = np.full(a, d.flip / (a - 1))
            p[0] = 1.0 - d.flip
            factors.append(p)
    probs, outcomes = [], []
    for combo in itertools.product(*[range(len(f)) for f in factors]):
        pr = 1.0
        for f, v in zip(factors, combo):
            pr *= f[v]
        if pr == 0.0:
            continue
        vals = list(combo[: len(spec.base_sources)])
        for pos, d in enumerate(spec.derived_sensors):
            if isinstance(d, Copy):
                vals.append(vals[d.of - 1])
            elif isinstance(d, Xor):
                vals.append(sum(vals[i - 1] for i in d.of) % a)
            elif isinstance(d, NoisyCopy):
                vals.append((vals[d.of - 1] + combo[noise_index[pos]]) % a)
            else:
                code, place = 0, 1
                for i in d.of:
                    code += vals[i - 1] * place
                    place *= a
                vals.append(d.table[code])
        probs.append(pr)
        outcomes.append(vals)
    outcomes = np.asarray(outcomes, dtype=np.int64)
    if spec.order is not None:
        outcomes = outcomes[:, [i - 1 for i in spec.order]]
    return np.asarray(probs), outcomes


def analytic_entropy_vector(spec: SourceSpec) -> EntropyVector:
    probs, outcomes = joint_atoms(spec)
    k = outcomes.shape[1]
    a = spec.alphabet
    values = {}
    for mask in all_masks(k):
        idx = [i - 1 for i in members(mask)]
        code = outcomes[:, idx] @ (a ** np.arange(len(idx), dtype=np.int64))
        _, inv = np.unique(code, return_inverse=True)
        marginal = np.bincount(inv.ravel(), weights=probs)
        values[mask] = entropy_from_counts(marginal)
    return EntropyVector(k, ANALYTIC, values, a)


# ---------------------------------------------------------------- canned ensembles

def xor_triple(seed: int = 0) -> SourceSpec:
    """Two fair bits and their XOR."""
    return SourceSpec((IID((0.5, 0.5)), IID((0.5, 0.5))), (Xor((1, 2)),), seed=seed)


def independent_plus_derived(seed: int = 0) -> SourceSpec:
    """Ten sensors: even-numbered ones are independent fair bits; odd-numbered
    ones are a copy or XORs of them (rank-5 binary matroid)."""
    bases = tuple(IID((0.5, 0.5)) for _ in range(5))
    derived = (Copy(1), Xor((1, 2)), Xor((2, 3)), Xor((3, 4)), Xor((4, 5)))
    # declared 1..5 = bases, 6..10 = derived; interleave as odd=derived, even=base
    order = (6, 1, 7, 2, 8, 3, 9, 4, 10, 5)
    return SourceSpec(bases, derived, seed=seed, order=order)


# ---------------------------------------------------------------- fusion scenarios

@dataclass(frozen=True)
class ObserverScenario:
    """Base sensors reading a binary target through Gaussian noise and
    occasional artifacts (reading replaced by a uniform draw)."""

    num_sensors: int = 15
    noise: Sequence[float] | float = 0.4
    artifact_prob: Sequence[float] | float = 0.1
    amplitude: float = 0.4
    switch_prob: float = 0.02
    seed: int = 0
    overrides: dict = field(default_factory=dict)  # 1-based sensor -> noise

    def noise_levels(self) -> np.ndarray:
        sig = np.broadcast_to(np.asarray(self.noise, dtype=float), (self.num_sensors,)).copy()
        for s, v in self.overrides.items():
            sig[int(s) - 1] = float(v)
        return sig


def observer_readings(sc: ObserverScenario, n: int) -> tuple[np.ndarray, np.ndarray]:
    """(K x n readings in [0, 1], truth bits).  The truth is a sticky binary
    chain; each reading is ``0.5 +/- amplitude`` plus noise, clipped."""
    rng = np.random.default_rng(sc.seed)
    flips = rng.random(n) < sc.switch_prob
    start = int(rng.random() < 0.5)
    truth = (start + np.cumsum(flips)) % 2
    k = sc.num_sensors
    sig = sc.noise_levels()
    clean = 0.5 + sc.amplitude * (2 * truth - 1)
    readings = clean[None, :] + sig[:, None] * rng.standard_normal((k, n))
    art = np.broadcast_to(np.asarray(sc.artifact_prob, dtype=float), (k,))
    hit = rng.random((k, n)) < art[:, None]
    readings = np.where(hit, rng.random((k, n)), readings)
    return np.clip(readings, 0.0, 1.0), truth.astype(np.int64)


def underestimating_readings(k: int, n: int, max_noise: float = 0.9, seed: int = 0):
    """Sensors reporting ``max(0, x_t - noise)`` for i.i.d. fair target bits,
    noise uniform on [0, max_noise]; every sensor under-reports a present target."""
    rng = np.random.default_rng(seed)
    truth = (rng.random(n) < 0.5).astype(np.int64)
    noise = rng.random((k, n)) * max_noise
    return np.maximum(0.0, truth[None, :] - noise), truth


def scenario_from_dict(doc: dict) -> ObserverScenario:
    keys = ObserverScenario.__dataclass_fields__
    unknown = set(doc) - set(keys) - {"scenario", "n"}
    if unknown:
        raise InputFormatError(f"unknown scenario keys: {sorted(unknown)}")
    return ObserverScenario(**{k: v for k, v in doc.items() if k in keys})


def binary_entropy(p: float) -> float:
    if p in (0.0, 1.0):
        return 0.0
    return -(p * math.log2(p) + (1 - p) * math.log2(1 - p))
