"""Polymatroid axiom checks, integer rounding to matroids, and independence
queries on entropy vectors."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .data import members, popcount
from .empirical import EntropyVector
from .errors import ValidationError

VIOLATION_CAP = 100
# cells per vectorized block when sweeping pairs of subsets
_BLOCK_CELLS = 1 << 22


@dataclass
class AxiomReport:
    is_polymatroid: bool
    worst_monotonicity_violation: float
    worst_submodularity_violation: float
    tolerance: float
    normalization_ok: bool = True
    # (axiom, I, J): "monotonicity" means I is a proper subset of J with g(I) > g(J)
    violating_pairs: list[tuple[str, int, int]] = field(default_factory=list)
    extra_failures: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "is_polymatroid": self.is_polymatroid,
            "normalization_ok": self.normalization_ok,
            "tolerance": self.tolerance,
            "worst_monotonicity_violation": self.worst_monotonicity_violation,
            "worst_submodularity_violation": self.worst_submodularity_violation,
            "violating_pairs": [
                {"axiom": a, "I": i, "J": j, "I_members": list(members(i)), "J_members": list(members(j))}
                for a, i, j in self.violating_pairs
            ],
            "extra_failures": list(self.extra_failures),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _sweep(dense: np.ndarray, tolerance: float, cap: int):
    """Worst signed monotonicity / submodularity violations over all pairs."""
    size = dense.shape[0]
    all_j = np.arange(size)
    block = max(1, _BLOCK_CELLS // size)
    worst_mono = -np.inf
    worst_sub = -np.inf
    pairs: list[tuple[str, int, int]] = []
    for start in range(0, size, block):
        i = np.arange(start, min(size, start + block))
        vi = dense[i][:, None]
        vj = dense[None, :]
        union = dense[i[:, None] | all_j[None, :]]
        inter = dense[i[:, None] & all_j[None, :]]

        sub = union + inter - vi - vj
        worst_sub = max(worst_sub, float(sub.max()))

        comparable = (i[:, None] & all_j[None, :]) == i[:, None]
        mono = np.where(comparable, vi - vj, -np.inf)
        worst_mono = max(worst_mono, float(mono.max()))

        if len(pairs) < cap:
            ii, jj = np.nonzero((mono > tolerance) & (i[:, None] != all_j[None, :]))
            for a, b in zip(ii.tolist(), jj.tolist()):
                if len(pairs) >= cap:
                    break
                pairs.append(("monotonicity", int(i[a]), int(b)))
            ii, jj = np.nonzero((sub > tolerance) & (i[:, None] < all_j[None, :]))
            for a, b in zip(ii.tolist(), jj.tolist()):
                if len(pairs) >= cap:
                    break
                pairs.append(("submodularity", int(i[a]), int(b)))
    return worst_mono, worst_sub, pairs


def check_polymatroid(vec: EntropyVector, tolerance: float = 1e-9, cap: int = VIOLATION_CAP) -> AxiomReport:
    """Exhaustively check monotonicity (all comparable pairs) and
    submodularity (all pairs).  Normalization holds by construction since the
    empty set is pinned at 0.

    Raises IncompleteVectorError if any non-empty subset is missing.
    """
    dense = vec.dense()
    worst_mono, worst_sub, pairs = _sweep(dense, tolerance, cap)
    return AxiomReport(
        is_polymatroid=worst_mono <= tolerance and worst_sub <= tolerance,
        worst_monotonicity_violation=worst_mono,
        worst_submodularity_violation=worst_sub,
        tolerance=tolerance,
        violating_pairs=pairs,
    )


# ---------------------------------------------------------------- matroids

class MatroidRoundingError(ValidationError):
    """Rounded ranks do not form a matroid; ``report`` says which axiom broke."""

    def __init__(self, message, report: AxiomReport):
        super().__init__(message)
        self.report = report


@dataclass
class MatroidCandidate:
    ranks: EntropyVector
    rank: int
    rounding_residual: float
    unit: float

    def rank_of(self, mask: int) -> int:
        return int(self.ranks[mask])

    def is_independent(self, mask: int) -> bool:
        return self.rank_of(mask) == popcount(mask)

    def bases(self) -> list[int]:
        return [m for m in self.ranks.values if self.is_independent(m) and self.rank_of(m) == self.rank]

    def contains_base(self, mask: int) -> bool:
        return self.rank_of(mask) == self.rank

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mask", "rank"])
        for m in sorted(self.ranks.values):
            w.writerow([m, int(self.ranks.values[m])])
        return buf.getvalue()


def default_unit(vec: EntropyVector) -> float:
    return math.log2(vec.alphabet_size) if vec.alphabet_size and vec.alphabet_size >= 2 else 1.0


def round_to_matroid(vec: EntropyVector, unit: float | None = None) -> MatroidCandidate:
    """Round ``vec / unit`` to the nearest integers and verify the matroid
    axioms exactly on the result."""
    if unit is None:
        unit = default_unit(vec)
    if not unit > 0:
        raise ValidationError(f"rounding unit must be positive, got {unit}")
    dense = vec.dense() / unit
    ranks = np.rint(dense)
    residual = float(np.abs(dense - ranks).max()) * unit

    sizes = np.array([popcount(m) for m in range(ranks.shape[0])])
    # exact integer arithmetic: tolerance 0
    worst_mono, worst_sub, pairs = _sweep(ranks, 0.0, VIOLATION_CAP)
    extra = [f"rank({m})={int(ranks[m])} > |I|={int(sizes[m])}" for m in np.flatnonzero(ranks > sizes)[:VIOLATION_CAP]]
    report = AxiomReport(
        is_polymatroid=worst_mono <= 0 and worst_sub <= 0,
        worst_monotonicity_violation=worst_mono,
        worst_submodularity_violation=worst_sub,
        tolerance=0.0,
        violating_pairs=pairs,
        extra_failures=extra,
    )
    if not report.is_polymatroid or extra:
        broken = []
        if worst_mono > 0:
            broken.append("monotonicity")
        if worst_sub > 0:
            broken.append("submodularity")
        if extra:
            broken.append("rank(I) <= |I|")
        raise MatroidRoundingError(f"rounded vector is not a matroid: {', '.join(broken)} violated", report)

    rank_vec = EntropyVector.from_dense(ranks, vec.kind, vec.alphabet_size)
    rank_vec.values = {m: int(v) for m, v in rank_vec.values.items()}
    return MatroidCandidate(
        ranks=rank_vec,
        rank=int(ranks[-1]),
        rounding_residual=residual,
        unit=unit,
    )


# ---------------------------------------------------------------- independence

def independence_defect(vec: EntropyVector, mask: int) -> float:
    """Sum of singleton entropies minus the joint entropy (multi-information)."""
    if mask <= 0:
        raise ValidationError("subset must be non-empty")
    singles = sum(vec[1 << (i - 1)] for i in members(mask))
    return singles - vec[mask]


def is_independent(vec: EntropyVector, mask: int, tolerance: float = 1e-9) -> bool:
    return independence_defect(vec, mask) <= tolerance
