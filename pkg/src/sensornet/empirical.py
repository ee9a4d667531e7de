"""Joint types and first-order joint empirical entropies.

An :class:`EntropyVector` maps non-empty subset masks to entropies in bits.
It is shared by the empirical, LZ78 and analytic estimators.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .data import (
    AlphabetSpec,
    SensorMatrix,
    all_masks,
    format_members,
    members,
    popcount,
    project_subset,
)
from .errors import IncompleteVectorError, InputFormatError, ValidationError

EMPIRICAL = "empirical-first-order"
LZ78 = "lz78"
ANALYTIC = "analytic"
KINDS = (EMPIRICAL, LZ78, ANALYTIC)

DEFAULT_LATTICE_CAP = 24


@dataclass(frozen=True)
class JointType:
    """Empirical joint distribution of the sensors in ``subset``.

    ``counts`` maps product symbols (see :func:`sensornet.data.project_subset`)
    to occurrence counts; unseen symbols are absent.
    """

    subset: int
    counts: Mapping[int, int]
    total: int
    alphabet: AlphabetSpec

    def frequencies(self) -> dict[int, float]:
        return {s: c / self.total for s, c in self.counts.items()}


def joint_type(matrix: SensorMatrix, subset: int) -> JointType:
    seq, _ = project_subset(matrix, subset)
    symbols, counts = np.unique(seq, return_counts=True)
    return JointType(
        subset=subset,
        counts=dict(zip(symbols.tolist(), counts.tolist())),
        total=matrix.num_steps,
        alphabet=matrix.alphabet,
    )


def entropy_from_counts(counts: Iterable[int]) -> float:
    """Plug-in entropy in bits; zero counts contribute nothing."""
    c = np.asarray([x for x in counts if x > 0], dtype=float)
    if c.size <= 1:
        return 0.0
    p = c / c.sum()
    return max(0.0, float(-(p * np.log2(p)).sum()))


def entropy_bits(dist: JointType) -> float:
    return entropy_from_counts(dist.counts.values())


def marginalize(dist: JointType, sub: int) -> JointType:
    """Sum ``dist`` over the members not in ``sub``."""
    if sub <= 0:
        raise ValidationError("marginal subset must be non-empty")
    if sub & ~dist.subset:
        raise ValidationError(
            f"{format_members(sub)} is not contained in {format_members(dist.subset)}"
        )
    if sub == dist.subset:
        return dist
    alpha = dist.alphabet.size
    full = members(dist.subset)
    keep = [r for r, i in enumerate(full) if sub >> (i - 1) & 1]
    out: dict[int, int] = {}
    for sym, c in dist.counts.items():
        digits = []
        for _ in full:
            digits.append(sym % alpha)
            sym //= alpha
        code, place = 0, 1
        for r in keep:
            code += digits[r] * place
            place *= alpha
        out[code] = out.get(code, 0) + c
    return JointType(subset=sub, counts=out, total=dist.total, alphabet=dist.alphabet)


@dataclass
class EntropyVector:
    """Entropies in bits for (some of) the non-empty subsets of K sensors."""

    num_sensors: int
    kind: str
    values: dict[int, float] = field(default_factory=dict)
    alphabet_size: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown entropy vector kind {self.kind!r}")
        top = 1 << self.num_sensors
        for m, v in self.values.items():
            if not 0 < m < top:
                raise ValidationError(f"mask {m} outside the lattice of K={self.num_sensors}")
            if v < 0:
                raise ValidationError(f"negative entropy {v} for {format_members(m)}")

    @property
    def evaluated(self) -> frozenset[int]:
        return frozenset(self.values)

    def __getitem__(self, mask: int) -> float:
        if mask == 0:
            return 0.0
        try:
            return self.values[mask]
        except KeyError:
            raise IncompleteVectorError(
                f"{format_members(mask)} has not been evaluated", missing=[mask]
            ) from None

    def __contains__(self, mask: int) -> bool:
        return mask == 0 or mask in self.values

    def missing(self) -> list[int]:
        return [m for m in all_masks(self.num_sensors) if m not in self.values]

    def is_complete(self) -> bool:
        return len(self.values) == (1 << self.num_sensors) - 1

    def dense(self) -> np.ndarray:
        """Array indexed by mask, entry 0 being the empty set (0 bits)."""
        miss = self.missing()
        if miss:
            shown = ", ".join(format_members(m) for m in miss[:10])
            more = "" if len(miss) <= 10 else f" (+{len(miss) - 10} more)"
            raise IncompleteVectorError(f"vector is partially evaluated; missing {shown}{more}", miss)
        out = np.zeros(1 << self.num_sensors)
        for m, v in self.values.items():
            out[m] = v
        return out

    @classmethod
    def from_dense(cls, arr, kind: str, alphabet_size: int | None = None) -> "EntropyVector":
        arr = np.asarray(arr, dtype=float)
        k = int(round(math.log2(arr.shape[0])))
        if 1 << k != arr.shape[0]:
            raise ValidationError("dense vector length must be a power of two")
        return cls(k, kind, {m: float(arr[m]) for m in range(1, 1 << k)}, alphabet_size)

    # -- serialization
    def to_json(self) -> str:
        doc = {
            "k": self.num_sensors,
            "kind": self.kind,
            "values": {str(m): self.values[m] for m in sorted(self.values)},
        }
        if self.alphabet_size is not None:
            doc["alphabet"] = self.alphabet_size
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EntropyVector":
        try:
            doc = json.loads(text)
            values = {int(m): float(v) for m, v in doc["values"].items()}
            return cls(int(doc["k"]), doc["kind"], values, doc.get("alphabet"))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputFormatError(f"malformed entropy vector JSON: {exc}") from exc

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mask", "members", "entropy_bits"])
        for m in sorted(self.values):
            w.writerow([m, " ".join(map(str, members(m))), repr(self.values[m])])
        return buf.getvalue()


def check_lattice_size(k: int, cap: int) -> None:
    if k > cap:
        raise ValidationError(
            f"K={k} exceeds the lattice cap of {cap} (2^K - 1 subsets); "
            f"pass an explicit subset list or query an EntropyOracle on demand"
        )


def empirical_entropy_vector(
    matrix: SensorMatrix,
    subsets: Iterable[int] | None = None,
    lattice_cap: int = DEFAULT_LATTICE_CAP,
) -> EntropyVector:
    """First-order joint empirical entropies for the requested subsets
    (all non-empty subsets when ``subsets`` is None)."""
    k = matrix.num_sensors
    if subsets is None:
        check_lattice_size(k, lattice_cap)
        subsets = all_masks(k)
    values = {}
    for mask in subsets:
        values[mask] = entropy_bits(joint_type(matrix, mask))
    return EntropyVector(k, EMPIRICAL, values, matrix.alphabet.size)


def max_entropy_bound(mask: int, alphabet_size: int) -> float:
    return popcount(mask) * math.log2(alphabet_size)
