"""LZ78 incremental parsing and the phrase-count entropy-rate estimate.

The estimate for a sequence of length n parsed into c phrases is
``c * log2(c) / n`` bits per time step.  Joint estimates parse the
product-alphabet projection of a subset, so they are on the same scale as
first-order empirical entropies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .data import AlphabetSpec, SensorMatrix, project_subset
from .empirical import LZ78, EntropyVector
from .errors import ValidationError


@dataclass(frozen=True)
class ParseResult:
    phrase_count: int
    complete_phrases: int
    last_phrase_partial: bool
    sequence_length: int
    alphabet_size: int
    phrase_lengths: tuple[int, ...]

    def phrases(self, seq: Sequence[int]) -> list[tuple[int, ...]]:
        """Split ``seq`` (the parsed input) into its phrases."""
        out, pos = [], 0
        for length in self.phrase_lengths:
            out.append(tuple(int(s) for s in seq[pos:pos + length]))
            pos += length
        return out


def _as_symbol_list(seq, alphabet: AlphabetSpec) -> list[int]:
    arr = np.asarray(seq, dtype=np.int64).ravel()
    if arr.size == 0:
        raise ValidationError("cannot parse an empty sequence")
    bad = (arr < 0) | (arr >= alphabet.size)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise ValidationError(f"symbol {arr[i]} at index {i} outside alphabet of size {alphabet.size}")
    return arr.tolist()


def lz78_parse(seq: Sequence[int], alphabet: AlphabetSpec) -> ParseResult:
    """Parse ``seq`` with the LZ78 rule: each phrase is the shortest prefix of
    the unparsed remainder that is not already in the dictionary.

    A trailing remainder that matches an existing phrase counts as one more
    (partial) phrase.
    """
    symbols = _as_symbol_list(seq, alphabet)
    # children[node] maps the next symbol to a child node; node 0 is the root
    children: list[dict[int, int]] = [{}]
    lengths = []
    node, depth = 0, 0
    for s in symbols:
        branch = children[node]
        nxt = branch.get(s)
        depth += 1
        if nxt is None:
            branch[s] = len(children)
            children.append({})
            lengths.append(depth)
            node, depth = 0, 0
        else:
            node = nxt
    complete = len(lengths)
    partial = depth > 0
    if partial:
        lengths.append(depth)
    return ParseResult(
        phrase_count=len(lengths),
        complete_phrases=complete,
        last_phrase_partial=partial,
        sequence_length=len(symbols),
        alphabet_size=alphabet.size,
        phrase_lengths=tuple(lengths),
    )


def estimate_from_count(c: int, n: int) -> float:
    return c * math.log2(c) / n if c > 1 else 0.0


def lz_entropy_estimate(seq: Sequence[int], alphabet: AlphabetSpec) -> float:
    res = lz78_parse(seq, alphabet)
    return estimate_from_count(res.phrase_count, res.sequence_length)


def lz_entropy_vector(matrix: SensorMatrix, subsets: Iterable[int]) -> EntropyVector:
    """LZ78 estimates over the product-alphabet projection of each subset.

    Every subset gets a fresh dictionary.
    """
    values = {}
    for mask in subsets:
        seq, product = project_subset(matrix, mask)
        values[mask] = lz_entropy_estimate(seq, product)
    return EntropyVector(matrix.num_sensors, LZ78, values, matrix.alphabet.size)


def format_phrase(phrase: Sequence[int], alphabet_size: int) -> str:
    if alphabet_size <= 10:
        return "".join(str(s) for s in phrase)
    return ".".join(str(s) for s in phrase)


def dump_phrases(seq: Sequence[int], alphabet: AlphabetSpec) -> str:
    """One phrase per line, for golden-file comparison."""
    res = lz78_parse(seq, alphabet)
    return "".join(format_phrase(p, alphabet.size) + "\n" for p in res.phrases(seq))


@dataclass(frozen=True)
class DeviationBound:
    """Markov-source tail bound for the LZ vector.

    ``probability_floor`` takes the hidden constant of the O((2^k-1)/sqrt(n))
    term as 1, so it is only a reporting heuristic.
    """

    deviation_cap: float
    order_term: float
    probability_floor: float
    note: str = "order term uses an assumed constant of 1 (heuristic)"


def markov_deviation_bound(k: int, n: int, h_full: float) -> DeviationBound:
    """Max-entry deviation cap ``h_full / log2(n)`` holding with probability at
    least ``1 - O((2^k - 1) / sqrt(n))``."""
    if n < 2:
        raise ValidationError("n must be at least 2")
    if h_full < 0:
        raise ValidationError("h_full must be non-negative")
    order = ((1 << k) - 1) / math.sqrt(n)
    return DeviationBound(
        deviation_cap=h_full / math.log2(n),
        order_term=order,
        probability_floor=max(0.0, 1.0 - order),
    )
