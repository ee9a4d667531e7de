import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sensornet.data import (
    AlphabetSpec,
    SensorMatrix,
    decode_product,
    load_matrix,
    load_readings,
    mask_of,
    members,
    project_subset,
    quantize_readings,
    write_wide_csv,
)
from sensornet.errors import (
    AlphabetOverflowError,
    EmptyInputError,
    InputFormatError,
    ValidationError,
)

from conftest import matrix


@pytest.mark.parametrize(
    "values, bins, expected",
    [
        ([0.0, 1.0], 2, [0, 1]),
        ([0.49, 0.51], 2, [0, 1]),
        ([0.2, 0.5, 0.9], 4, [0, 2, 3]),
    ],
)
def test_quantize_examples(values, bins, expected):
    assert quantize_readings(values, bins).tolist() == expected


@pytest.mark.parametrize("bad", [[0.5, 1.2], [0.1, -0.01], [0.3, float("nan")], [float("inf")]])
def test_quantize_rejects_out_of_range_with_index(bad):
    with pytest.raises(ValidationError, match="index"):
        quantize_readings(bad, 2)


def test_quantize_rejects_single_bin():
    with pytest.raises(ValidationError):
        quantize_readings([0.1], 1)


@given(st.lists(st.floats(0, 1), min_size=2, max_size=50), st.integers(2, 17))
def test_quantize_monotone(values, bins):
    v = np.sort(values)
    q = quantize_readings(v, bins)
    assert (np.diff(q) >= 0).all()
    assert q.min() >= 0 and q.max() < bins


def test_masks_roundtrip():
    assert mask_of([1, 3]) == 0b101
    assert members(0b101) == (1, 3)
    assert members(0) == ()


def test_project_pair_example():
    m = matrix([[0, 1], [1, 1]])
    seq, prod = project_subset(m, mask_of([1, 2]))
    assert seq.tolist() == [2, 3]
    assert prod.size == 4


def test_project_singleton_is_identity():
    m = matrix([[0, 2, 1, 2], [1, 1, 0, 0]], alphabet=3)
    seq, prod = project_subset(m, mask_of([1]))
    assert seq.tolist() == [0, 2, 1, 2]
    assert prod.size == 3


def test_project_all_zero():
    m = matrix([[0, 0, 0], [0, 0, 0]])
    seq, prod = project_subset(m, 0b11)
    assert seq.tolist() == [0, 0, 0] and prod.size == 4


def test_project_rejects_empty_and_foreign():
    m = matrix([[0, 1]])
    with pytest.raises(ValidationError):
        project_subset(m, 0)
    with pytest.raises(ValidationError):
        project_subset(m, 0b10)


def test_project_overflow():
    m = SensorMatrix(np.zeros((40, 3), dtype=int), AlphabetSpec(4))
    with pytest.raises(AlphabetOverflowError):
        project_subset(m, (1 << 40) - 1)


@given(
    st.integers(2, 4).flatmap(
        lambda a: st.tuples(
            st.just(a),
            st.lists(st.lists(st.integers(0, a - 1), min_size=6, max_size=6), min_size=1, max_size=4),
        )
    ),
    st.integers(1, 15),
)
def test_project_injective_roundtrip(case, raw_mask):
    a, rows = case
    m = matrix(rows, alphabet=a)
    mask = raw_mask & ((1 << len(rows)) - 1) or 1
    seq, _ = project_subset(m, mask)
    idx = [i - 1 for i in members(mask)]
    assert (decode_product(seq, m.alphabet, len(idx)) == m.symbols[idx]).all()
    # equal product symbols exactly when all members agree
    for t in range(6):
        for u in range(6):
            same = all(m.symbols[i, t] == m.symbols[i, u] for i in idx)
            assert (seq[t] == seq[u]) == same


def test_matrix_is_immutable_and_validated():
    m = matrix([[0, 1, 1]])
    with pytest.raises(ValueError):
        m.symbols[0, 0] = 1
    with pytest.raises(ValidationError, match="sensor 1 at step 2"):
        matrix([[0, 1, 2]])
    with pytest.raises(ValidationError):
        SensorMatrix.from_rows([[0, 1], [0]])


def test_wide_csv_roundtrip(tmp_path):
    m = matrix([[0, 1, 2, 1], [2, 2, 0, 1]], alphabet=3)
    p = tmp_path / "m.csv"
    write_wide_csv(p, m.symbols)
    assert p.read_text().splitlines()[0] == "t,s1,s2"
    back = load_matrix(p)
    assert back.alphabet.size == 3
    assert (back.symbols == m.symbols).all()


def test_long_csv_quantized(tmp_path):
    p = tmp_path / "long.csv"
    p.write_text(
        "epoch,sensor_id,value\n"
        "1,7,0.1\n1,3,0.9\n2,7,0.6\n2,3,1.0\n3,3,0.2\n3,7,0.5\n"
    )
    m = load_matrix(p, bins=2)
    # sensors sorted by id: 3 then 7
    assert m.symbols.tolist() == [[1, 1, 0], [0, 1, 1]]
    r, truth = load_readings(p)
    assert truth is None and r.shape == (2, 3)


def test_long_csv_missing_cell(tmp_path):
    p = tmp_path / "long.csv"
    p.write_text("epoch,sensor_id,value\n1,1,0.1\n1,2,0.3\n2,1,0.4\n")
    with pytest.raises(InputFormatError, match="pre-aligned"):
        load_matrix(p)


def test_empty_and_header_only(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("")
    with pytest.raises(EmptyInputError):
        load_matrix(p)
    p.write_text("t,s1,s2\n")
    with pytest.raises(EmptyInputError):
        load_matrix(p)


def test_unknown_header(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(InputFormatError):
        load_matrix(p)


def test_readings_with_truth_column(tmp_path):
    p = tmp_path / "r.csv"
    write_wide_csv(p, np.array([[0.25, 0.5], [1.0, 0.0]]), truth=np.array([1, 0]))
    r, x = load_readings(p)
    assert r.tolist() == [[0.25, 0.5], [1.0, 0.0]]
    assert x.tolist() == [1, 0]
