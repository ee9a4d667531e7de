"""Multi-sensor symbol data: alphabets, the sensor matrix, subset masks,
quantization, product-alphabet projection and CSV ingestion.

Subsets of sensors are plain ``int`` bitmasks: bit ``i - 1`` is set iff
sensor ``i`` (1-based) belongs to the subset.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AlphabetOverflowError,
    EmptyInputError,
    InputFormatError,
    ValidationError,
)

# product symbols are stored as int64
MAX_PRODUCT_ALPHABET = 2**63


@dataclass(frozen=True)
class AlphabetSpec:
    """Symbols are ``0 .. size - 1``."""

    size: int

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 1:
            raise ValidationError(f"alphabet size must be a positive integer, got {self.size!r}")

    @property
    def degenerate(self) -> bool:
        # a single-symbol stream always has zero entropy
        return self.size < 2


# ---------------------------------------------------------------- masks

def mask_of(members: Iterable[int]) -> int:
    """Bitmask for 1-based sensor indices."""
    mask = 0
    for i in members:
        if i < 1:
            raise ValidationError(f"sensor indices are 1-based, got {i}")
        mask |= 1 << (i - 1)
    return mask


def members(mask: int) -> tuple[int, ...]:
    """1-based sensor indices in ``mask``, ascending."""
    out = []
    i = 1
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def full_mask(k: int) -> int:
    return (1 << k) - 1


def all_masks(k: int) -> range:
    """Every non-empty subset of ``k`` sensors, in increasing mask order."""
    return range(1, 1 << k)


def format_members(mask: int) -> str:
    return "{" + ",".join(str(i) for i in members(mask)) + "}"


# ---------------------------------------------------------------- matrix

@dataclass(frozen=True)
class SensorMatrix:
    """K sensor streams of n symbols over one shared alphabet.

    The symbol grid is copied on construction and made read-only.
    """

    symbols: np.ndarray
    alphabet: AlphabetSpec

    def __post_init__(self):
        arr = np.array(self.symbols, dtype=np.int64, copy=True)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(f"symbols must be a non-empty K x n grid, got shape {arr.shape}")
        bad = (arr < 0) | (arr >= self.alphabet.size)
        if bad.any():
            row, col = map(int, np.argwhere(bad)[0])
            raise ValidationError(
                f"symbol {arr[row, col]} of sensor {row + 1} at step {col} "
                f"outside alphabet of size {self.alphabet.size}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "symbols", arr)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], alphabet_size: int | None = None) -> "SensorMatrix":
        lengths = {len(r) for r in rows}
        if len(lengths) != 1:
            raise ValidationError(f"all sensor rows must have identical length, got lengths {sorted(lengths)}")
        arr = np.asarray(rows, dtype=np.int64)
        if alphabet_size is None:
            alphabet_size = max(2, int(arr.max()) + 1)
        return cls(arr, AlphabetSpec(alphabet_size))

    @property
    def num_sensors(self) -> int:
        return self.symbols.shape[0]

    @property
    def num_steps(self) -> int:
        return self.symbols.shape[1]

    def row(self, sensor: int) -> np.ndarray:
        """Row of 1-based ``sensor``."""
        return self.symbols[sensor - 1]

    def check_mask(self, mask: int) -> None:
        if mask <= 0:
            raise ValidationError("subset must be non-empty")
        if mask >> self.num_sensors:
            raise ValidationError(
                f"subset {format_members(mask)} references sensors beyond K={self.num_sensors}"
            )


def quantize_readings(values: Sequence[float], bins: int) -> np.ndarray:
    """Map readings in [0, 1] to ``floor(v * bins)``, with 1.0 going to the top bin."""
    if int(bins) != bins or bins < 2:
        raise ValidationError(f"bins must be an integer >= 2, got {bins!r}")
    v = np.asarray(values, dtype=float)
    bad = ~np.isfinite(v) | (v < 0.0) | (v > 1.0)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise ValidationError(f"reading at index {idx} is {v[idx]!r}, expected a finite value in [0, 1]")
    return np.minimum(np.floor(v * bins).astype(np.int64), bins - 1)


def product_alphabet_size(alphabet: AlphabetSpec, subset_size: int) -> int:
    size = alphabet.size**subset_size
    if size > MAX_PRODUCT_ALPHABET:
        raise AlphabetOverflowError(
            f"product alphabet {alphabet.size}^{subset_size} exceeds the int64 symbol range; "
            f"use a smaller subset or a coarser quantization"
        )
    return size


def project_subset(matrix: SensorMatrix, mask: int) -> tuple[np.ndarray, AlphabetSpec]:
    """Encode the member rows of ``mask`` as one sequence over the product alphabet.

    The lowest-indexed member is the least significant base-alpha digit.
    """
    matrix.check_mask(mask)
    idx = [i - 1 for i in members(mask)]
    product = AlphabetSpec(product_alphabet_size(matrix.alphabet, len(idx)))
    if len(idx) == 1:
        return matrix.symbols[idx[0]], product
    alpha = matrix.alphabet.size
    out = np.zeros(matrix.num_steps, dtype=np.int64)
    place = 1
    for i in idx:
        out += matrix.symbols[i] * place
        place *= alpha
    return out, product


def decode_product(symbols: np.ndarray, alphabet: AlphabetSpec, subset_size: int) -> np.ndarray:
    """Inverse of :func:`project_subset`: ``subset_size x n`` digit grid."""
    s = np.asarray(symbols, dtype=np.int64).copy()
    out = np.empty((subset_size, s.shape[0]), dtype=np.int64)
    for r in range(subset_size):
        out[r] = s % alphabet.size
        s //= alphabet.size
    return out


# ---------------------------------------------------------------- CSV

WIDE = "wide"
LONG = "long"
LONG_HEADER = ["epoch", "sensor_id", "value"]


def _read_rows(path: Path) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except UnicodeDecodeError as exc:
        raise InputFormatError(f"{path}: not a text CSV file ({exc})") from exc
    if not rows:
        raise EmptyInputError(f"{path}: file is empty")
    header = [c.strip() for c in rows[0]]
    if len(rows) == 1:
        raise EmptyInputError(f"{path}: header only, no data rows")
    return header, rows[1:]


def detect_layout(header: Sequence[str]) -> str:
    h = [c.strip().lower() for c in header]
    if h == LONG_HEADER:
        return LONG
    if len(h) >= 2 and h[0] == "t" and h[1].startswith("s"):
        return WIDE
    raise InputFormatError(
        f"unrecognised CSV header {list(header)}; expected 't,s1,...,sK' or 'epoch,sensor_id,value'"
    )


def _wide_columns(header: list[str]) -> tuple[list[int], int | None]:
    sensor_cols, truth_col = [], None
    for j, name in enumerate(header[1:], start=1):
        lname = name.lower()
        if lname == "x":
            truth_col = j
        elif lname.startswith("s") and lname[1:].isdigit():
            sensor_cols.append(j)
        else:
            raise InputFormatError(f"unexpected column {name!r} in wide layout")
    return sensor_cols, truth_col


def _parse_number(cell: str, where: str, integer: bool):
    try:
        return int(cell) if integer else float(cell)
    except ValueError:
        kind = "integer symbol" if integer else "number"
        raise InputFormatError(f"{where}: expected {kind}, got {cell!r}") from None


def _long_grid(rows: list[list[str]], path: Path) -> tuple[list, np.ndarray]:
    cells: dict[tuple[str, str], float] = {}
    for lineno, r in enumerate(rows, start=2):
        if len(r) != 3:
            raise InputFormatError(f"{path}:{lineno}: expected 3 columns, got {len(r)}")
        epoch, sid, val = (c.strip() for c in r)
        key = (sid, epoch)
        if key in cells:
            raise InputFormatError(f"{path}:{lineno}: duplicate reading for sensor {sid} at epoch {epoch}")
        cells[key] = _parse_number(val, f"{path}:{lineno}", integer=False)

    def order(x):
        try:
            return (0, float(x), x)
        except ValueError:
            return (1, 0.0, x)

    sensors = sorted({k[0] for k in cells}, key=order)
    epochs = sorted({k[1] for k in cells}, key=order)
    grid = np.empty((len(sensors), len(epochs)))
    for a, sid in enumerate(sensors):
        for b, ep in enumerate(epochs):
            try:
                grid[a, b] = cells[(sid, ep)]
            except KeyError:
                raise InputFormatError(
                    f"{path}: sensor {sid} has no reading at epoch {ep}; inputs must be pre-aligned"
                ) from None
    return sensors, grid


def load_matrix(path, bins: int = 2, alphabet_size: int | None = None) -> SensorMatrix:
    """Read a wide (integer symbols) or long (readings in [0, 1]) CSV.

    Long-layout readings are quantized into ``bins`` symbols on load.  A truth
    column ``x`` in the wide layout is ignored here.
    """
    path = Path(path)
    header, rows = _read_rows(path)
    layout = detect_layout(header)
    if layout == LONG:
        _, grid = _long_grid(rows, path)
        try:
            q = np.vstack([quantize_readings(r, bins) for r in grid])
        except ValidationError as exc:
            raise InputFormatError(f"{path}: {exc}") from exc
        return SensorMatrix(q, AlphabetSpec(bins))

    cols, _ = _wide_columns(header)
    if not cols:
        raise InputFormatError(f"{path}: no sensor columns")
    data = []
    for lineno, r in enumerate(rows, start=2):
        if len(r) != len(header):
            raise InputFormatError(f"{path}:{lineno}: expected {len(header)} columns, got {len(r)}")
        data.append([_parse_number(r[j].strip(), f"{path}:{lineno}", integer=True) for j in cols])
    arr = np.asarray(data, dtype=np.int64).T
    if (arr < 0).any():
        raise InputFormatError(f"{path}: negative symbol")
    size = alphabet_size if alphabet_size is not None else max(2, int(arr.max()) + 1)
    try:
        return SensorMatrix(arr, AlphabetSpec(size))
    except ValidationError as exc:
        raise InputFormatError(f"{path}: {exc}") from exc


def load_readings(path) -> tuple[np.ndarray, np.ndarray | None]:
    """Read real-valued readings in [0, 1] as a K x n array, plus the truth
    column ``x`` when the wide layout carries one."""
    path = Path(path)
    header, rows = _read_rows(path)
    if detect_layout(header) == LONG:
        _, grid = _long_grid(rows, path)
        truth = None
    else:
        cols, truth_col = _wide_columns(header)
        data, xs = [], []
        for lineno, r in enumerate(rows, start=2):
            if len(r) != len(header):
                raise InputFormatError(f"{path}:{lineno}: expected {len(header)} columns, got {len(r)}")
            where = f"{path}:{lineno}"
            data.append([_parse_number(r[j].strip(), where, integer=False) for j in cols])
            if truth_col is not None:
                xs.append(_parse_number(r[truth_col].strip(), where, integer=True))
        grid = np.asarray(data, dtype=float).T
        truth = np.asarray(xs, dtype=np.int64) if truth_col is not None else None
    if not np.all(np.isfinite(grid)) or (grid < 0).any() or (grid > 1).any():
        raise InputFormatError(f"{path}: readings must lie in [0, 1]")
    if truth is not None and not np.isin(truth, (0, 1)).all():
        raise InputFormatError(f"{path}: truth column x must hold bits")
    return grid, truth


def load_truth(path) -> np.ndarray:
    """Read a ``t,x`` CSV of truth bits."""
    path = Path(path)
    header, rows = _read_rows(path)
    if [c.lower() for c in header] != ["t", "x"]:
        raise InputFormatError(f"{path}: expected header 't,x', got {header}")
    xs = [_parse_number(r[1].strip(), f"{path}:{i}", integer=True) for i, r in enumerate(rows, start=2)]
    truth = np.asarray(xs, dtype=np.int64)
    if not np.isin(truth, (0, 1)).all():
        raise InputFormatError(f"{path}: truth must hold bits")
    return truth


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_wide_csv(path, rows: np.ndarray, truth: np.ndarray | None = None) -> None:
    """Write a K x n grid (symbols or readings) in the wide layout."""
    rows = np.asarray(rows)
    if rows.ndim == 1:
        rows = rows[None, :]
    k, n = rows.shape
    header = ["t"] + [f"s{i}" for i in range(1, k + 1)] + (["x"] if truth is not None else [])
    integer = np.issubdtype(rows.dtype, np.integer)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t in range(n):
            cells = [str(t)]
            cells += [str(int(v)) if integer else _fmt(float(v)) for v in rows[:, t]]
            if truth is not None:
                cells.append(str(int(truth[t])))
            w.writerow(cells)


def log2_alphabet(alphabet: AlphabetSpec) -> float:
    return math.log2(alphabet.size)
