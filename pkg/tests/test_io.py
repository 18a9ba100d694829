import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from coalclust import io
from coalclust.coalescent import sample_prior
from coalclust.errors import DataError


@settings(max_examples=40, deadline=None)
@given(hnp.arrays(np.float64, hnp.array_shapes(min_dims=2, max_dims=2, max_side=6),
                  elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_matrix_round_trip_is_exact(tmp_path_factory, matrix):
    path = tmp_path_factory.mktemp("m") / "data.csv"
    io.write_matrix(path, matrix)
    assert io.read_matrix(path).tobytes() == matrix.astype(float).tobytes() or np.array_equal(
        io.read_matrix(path), matrix)


def test_ragged_and_bad_csv(tmp_path):
    (tmp_path / "a.csv").write_text("1,2\n3\n")
    with pytest.raises(DataError, match="a.csv:2"):
        io.read_matrix(tmp_path / "a.csv")
    (tmp_path / "b.csv").write_text("1,x\n")
    with pytest.raises(DataError):
        io.read_matrix(tmp_path / "b.csv")
    (tmp_path / "c.csv").write_text("\n")
    with pytest.raises(DataError):
        io.read_matrix(tmp_path / "c.csv")
    (tmp_path / "d.csv").write_text("1,nan\n")
    with pytest.raises(DataError):
        io.read_matrix(tmp_path / "d.csv")
    with pytest.raises(DataError):
        io.read_matrix(tmp_path / "missing.csv")


def test_labels_round_trip(tmp_path):
    io.write_labels(tmp_path / "labels.csv", [3, 0, 1])
    assert list(io.read_labels(tmp_path / "labels.csv")) == [3, 0, 1]


def test_coords(tmp_path):
    (tmp_path / "g.json").write_text(json.dumps({"grid": [2, 3]}))
    assert io.read_coords(tmp_path / "g.json").shape == (6, 2)
    (tmp_path / "p.json").write_text(json.dumps({"positions": [0.0, 1.0, 2.5]}))
    assert list(io.read_coords(tmp_path / "p.json")) == [0.0, 1.0, 2.5]
    (tmp_path / "x.json").write_text("{}")
    with pytest.raises(DataError):
        io.read_coords(tmp_path / "x.json")


def test_tree_files(tmp_path):
    tree = sample_prior(7, np.random.default_rng(0))
    io.write_tree(tmp_path, "truth", tree)
    assert io.read_tree(tmp_path / "truth.json") == tree
    back = io.read_tree(tmp_path / "truth.newick")
    assert np.allclose(back.times, tree.times, rtol=1e-12)
    (tmp_path / "bad.newick").write_text("((0:1,1:1);")
    with pytest.raises(DataError):
        io.read_tree(tmp_path / "bad.newick")
