import hashlib
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crashshap.dataset import (
    DEFAULT_SIGNAL, ColumnSpec, EncodedMatrix, SignalSpec, binarize_target, bundled_data_path, clean,
    derive_features, encode, generate_synthetic, load_csv, preprocess, scale_minmax, split_indices,
    stratified_split, time_bucket, write_csv,
)
from crashshap.errors import DataError, EmptyDatasetError, SchemaError

from conftest import matrix


def _write(tmp_path, header, rows, name="d.csv"):
    p = tmp_path / name
    p.write_text("\n".join([",".join(header)] + [",".join(r) for r in rows]) + "\n", encoding="utf-8")
    return p


def test_schema_shape(schema):
    names = schema.feature_names
    assert len(names) == 25 and len(set(names)) == 25
    assert schema.column("Casualty class").kind == "ordinal"
    assert schema.target.kind == "ordinal"
    assert list(schema.target.categories) == ["Non Fatal", "Fatal"]
    assert {c.name for c in schema.features if c.derived} == {"Weekend", "Time of day"}


def test_schema_roundtrip(schema):
    from crashshap.dataset import TabularSchema
    assert TabularSchema.from_dict(schema.to_dict()) == schema


@pytest.mark.parametrize("bad", [
    dict(name="a", kind="categorical", categories=("x",)),
    dict(name="a", kind="categorical", categories=("x", "x")),
    dict(name="a", kind="numeric", value_range=(3.0, 1.0)),
    dict(name="a", kind="numeric"),
    dict(name="a", kind="text", categories=("x", "y")),
])
def test_column_spec_invariants(bad):
    with pytest.raises(SchemaError):
        ColumnSpec(**bad)


def test_load_three_rows(schema, tmp_path):
    t = generate_synthetic(schema, 50, 1)
    t3 = replace(t, rows=t.rows[:3])
    p = tmp_path / "three.csv"
    write_csv(t3, p)
    back = load_csv(p, schema)
    assert len(back) == 3
    assert back.rows == t3.rows


def test_load_missing_column(schema, tmp_path, bundled):
    p = tmp_path / "x.csv"
    write_csv(replace(bundled, columns=tuple(c for c in bundled.columns if c != "Light")), p)
    with pytest.raises(SchemaError, match="Light"):
        load_csv(p, schema)


def test_load_duplicate_and_unknown_header(schema, tmp_path):
    header = [c.name for c in schema.raw_features] + ["Accident severity"]
    with pytest.raises(SchemaError, match="duplicate"):
        load_csv(_write(tmp_path, header + ["Light"], []), schema)
    with pytest.raises(SchemaError, match="unknown"):
        load_csv(_write(tmp_path, header + ["Colour"], []), schema)


def test_load_arity_and_missing_file(schema, tmp_path):
    header = [c.name for c in schema.raw_features] + ["Accident severity"]
    with pytest.raises(DataError, match="expected"):
        load_csv(_write(tmp_path, header, [["1", "2"]]), schema)
    with pytest.raises(DataError):
        load_csv(tmp_path / "nope.csv", schema)


def test_header_order_insensitive(schema, tmp_path, bundled):
    cols = tuple(reversed(bundled.columns))
    p = tmp_path / "rev.csv"
    write_csv(replace(bundled, columns=cols, rows=bundled.rows[:20]), p)
    assert load_csv(p, schema).rows == bundled.rows[:20]


def test_unparseable_numeric_becomes_null(schema, tmp_path, bundled):
    p = tmp_path / "a.csv"
    write_csv(replace(bundled, rows=bundled.rows[:5]), p)
    lines = p.read_text().splitlines()
    j = lines[0].split(",").index("Driver age")
    cells = lines[1].split(",")
    cells[j] = "abc"
    lines[1] = ",".join(cells)
    p.write_text("\n".join(lines) + "\n")
    t = load_csv(p, schema)
    assert t.rows[0]["Driver age"] is None
    assert len(clean(t)) == 4


def test_clean(bundled):
    t = replace(bundled, rows=bundled.rows[:10])
    assert clean(t) == t
    rows = list(t.rows)
    rows[2] = {**rows[2], "Light": None}
    rows[7] = {**rows[7], "Driver age": 200.0}  # out of range counts as null
    c = clean(replace(t, rows=tuple(rows)))
    assert len(c) == 8
    assert c.rows == tuple(r for i, r in enumerate(t.rows) if i not in (2, 7))
    assert clean(c) == c
    with pytest.raises(EmptyDatasetError):
        clean(replace(t, rows=tuple({**r, "Weather": None} for r in t.rows)))


@pytest.mark.parametrize("hour,bucket", [(0, "night"), (2, "night"), (5, "night"), (6, "morning"), (11, "morning"),
                                         (12, "afternoon"), (17, "afternoon"), (18, "evening"), (23, "evening")])
def test_time_bucket(hour, bucket):
    assert time_bucket(hour) == bucket


def test_derive_features(bundled):
    d = derive_features(bundled)
    for r in d.rows[:200]:
        assert r["Weekend"] == (1.0 if r["Day of week"] in ("Friday", "Saturday") else 0.0)
        assert r["Time of day"] == time_bucket(r["Time"])
    with pytest.raises(DataError):
        derive_features(replace(bundled, columns=tuple(c for c in bundled.columns if c != "Time")))


def test_binarize(bundled):
    b = binarize_target(bundled)
    assert "Accident severity" not in b.columns
    for raw, new in zip(bundled.rows, b.rows):
        assert new["Accident Fatality"] == ("Fatal" if raw["Accident severity"] == "Fatal" else "Non Fatal")
    bad = replace(bundled, rows=({**bundled.rows[0], "Accident severity": "Grazed"},))
    with pytest.raises(DataError):
        binarize_target(bad)


def test_encode_codes(bundled):
    m = preprocess(bundled)
    vt = m.encoding_maps["Vehicle type"]
    assert list(vt) == sorted(vt)
    assert list(vt.values()) == list(range(len(vt)))
    cc = m.encoding_maps["Casualty class"]
    assert list(cc) == list(bundled.schema.column("Casualty class").categories)
    assert set(m.y.tolist()) == {0, 1}
    # decode(encode(v)) = v
    j = m.feature_names.index("Vehicle type")
    rows = binarize_target(derive_features(clean(bundled))).rows
    for i in range(50):
        assert m.decode("Vehicle type", m.x[i, j]) == rows[i]["Vehicle type"]


def test_encode_sorted_two_categories(schema, bundled):
    t = derive_features(binarize_target(bundled))
    rows = tuple({**r, "Vehicle type": "Car" if i % 2 else "Bus"} for i, r in enumerate(t.rows[:10]))
    m = encode(replace(t, rows=rows))
    assert m.encoding_maps["Vehicle type"] == {"Bus": 0, "Car": 1}


def test_encode_inadmissible(bundled):
    t = derive_features(binarize_target(bundled))
    rows = ({**t.rows[0], "Vehicle type": "Hovercraft"},) + t.rows[1:5]
    with pytest.raises(SchemaError, match="Hovercraft"):
        encode(replace(t, rows=rows))


def test_scale_examples():
    m = matrix([[2.0, 5.0], [4.0, 5.0], [6.0, 5.0]], [0, 1, 0])
    s = scale_minmax(m)
    np.testing.assert_array_equal(s.x, [[0, 0], [0.5, 0], [1, 0]])
    t = scale_minmax(matrix([[8.0, 5.0], [0.0, 5.0]], [0, 1]), s.scale_params)
    np.testing.assert_array_equal(t.x, [[1.0, 0.0], [0.0, 0.0]])


def test_scaled_train_is_unit_box(bundled):
    m = scale_minmax(preprocess(bundled))
    assert m.x.min() >= 0 and m.x.max() <= 1
    span = np.ptp(preprocess(bundled).x, axis=0) > 0
    np.testing.assert_array_equal(m.x.min(axis=0)[span], 0.0)
    np.testing.assert_array_equal(m.x.max(axis=0)[span], 1.0)


def test_stratified_split_example():
    y = np.array([1] * 60 + [0] * 40)
    m = matrix(np.arange(100, dtype=float)[:, None], y)
    tr, te = stratified_split(m, 0.2, 7)
    assert int(te.y.sum()) == 12 and int((te.y == 0).sum()) == 8
    tr2, te2 = stratified_split(m, 0.2, 7)
    np.testing.assert_array_equal(te.x, te2.x)
    assert sorted(np.concatenate([tr.x[:, 0], te.x[:, 0]]).tolist()) == list(range(100))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 200), st.integers(2, 200), st.floats(0.05, 0.5), st.integers(0, 1000))
def test_split_property(n0, n1, frac, seed):
    y = np.array([0] * n0 + [1] * n1)
    n_test = [int(np.floor(c * frac + 0.5)) for c in (n0, n1)]
    if any(t in (0, c) for t, c in zip(n_test, (n0, n1))):
        with pytest.raises(DataError):
            split_indices(y, frac, seed)
        return
    tr, te = split_indices(y, frac, seed)
    assert len(np.intersect1d(tr, te)) == 0 and len(tr) + len(te) == len(y)
    for c, cnt in ((0, n0), (1, n1)):
        assert abs(np.sum(y[te] == c) / cnt - frac) <= 1 / cnt


def test_split_errors():
    with pytest.raises(DataError):
        split_indices(np.array([0, 0, 1, 1]), 1.5, 0)
    with pytest.raises(DataError):
        split_indices(np.array([0, 0, 0, 1]), 0.2, 0)


def test_synthetic_ratio(schema):
    for seed in range(3):
        m = preprocess(generate_synthetic(schema, 1700, seed))
        assert abs(m.y.mean() - 1165 / 1700) <= 0.02


def test_synthetic_zero_signal_ratio(schema):
    sig = SignalSpec({}, (1, 1))
    m = preprocess(generate_synthetic(schema, 400, 3, sig))
    # binomial 99% interval around 0.5 at n=400
    assert abs(m.y.mean() - 0.5) <= 2.576 * np.sqrt(0.25 / 400)


def test_synthetic_errors(schema):
    with pytest.raises(DataError):
        generate_synthetic(schema, 0, 0)
    with pytest.raises(DataError):
        generate_synthetic(schema, 100, 0, SignalSpec({"Colour": 1.0}))


def test_ground_truth_ranking():
    assert DEFAULT_SIGNAL.ranking()[0][0] == "Casualty class"


def test_bundled_golden(schema, tmp_path):
    p = tmp_path / "regen.csv"
    write_csv(generate_synthetic(schema, 1700, 42), p)
    shipped = bundled_data_path().read_bytes()
    assert hashlib.sha256(p.read_bytes()).hexdigest() == hashlib.sha256(shipped).hexdigest()
    assert shipped.count(b"\n") == 1701


def test_encoded_matrix_guards():
    with pytest.raises(DataError):
        EncodedMatrix(np.zeros((3, 2)), np.zeros(2), ("a", "b"))
    m = matrix(np.zeros((3, 2)), [0, 1, 0])
    with pytest.raises(DataError):
        m.select(["zz"])
