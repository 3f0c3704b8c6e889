import io
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from otloss.cost_matrix import (
    EmbeddingFormatError,
    LabelEmbeddingTable,
    LabelSet,
    MissingTokenError,
    build_cost_matrix,
    dump_embeddings,
    label_vector,
    load_embeddings,
    read_cost_matrix_csv,
    write_cost_matrix_csv,
)

DATA = Path(__file__).parent / "data"


def table(**vecs):
    dim = len(next(iter(vecs.values())))
    return LabelEmbeddingTable(dim, vecs)


def random_setup(rng, n, dim=4, background=True, multiword=True):
    words = [f"w{i}" for i in range(n + 3)]
    tab = LabelEmbeddingTable(dim, {w: rng.normal(size=dim) for w in words})
    names = []
    for i in range(n):
        if multiword and i % 3 == 2:
            names.append(f"{words[i]} {words[-1]}")
        else:
            names.append(words[i])
    bg = None
    if background:
        names[0] = "background"
        bg = 0
    return LabelSet(tuple(names), bg), tab


class TestLoadEmbeddings:
    def test_two_records(self):
        t = load_embeddings(b"on\t1 0 0\nriding\t0 1 0.5\n")
        assert t.dimension == 3
        assert len(t) == 2
        np.testing.assert_array_equal(t["riding"], [0, 1, 0.5])

    def test_inconsistent_dimension(self):
        with pytest.raises(EmbeddingFormatError, match="line 2"):
            load_embeddings(b"on\t1 0 0\nriding\t0 1 0 1\n")

    def test_empty_stream(self):
        with pytest.raises(EmbeddingFormatError, match="dimension"):
            load_embeddings(io.BytesIO(b""))

    @pytest.mark.parametrize(
        "payload, match",
        [
            (b"on 1 0\n", "TAB"),
            (b"on\t1 x\n", "non-numeric"),
            (b"on\t0 0\n", "zero-norm"),
            (b"on\t1 0\nON\t0 1\n", "duplicate"),
            (b"on\t\n", "no components"),
            (b"\xff\xfe\t1\n", "UTF-8"),
        ],
    )
    def test_malformed(self, payload, match):
        with pytest.raises(EmbeddingFormatError, match=match):
            load_embeddings(payload)

    def test_tokens_are_normalized(self):
        t = load_embeddings(b"Walking\t1 2\n")
        assert "walking" in t
        assert "WALKING" in t

    def test_dump_round_trip(self):
        rng = np.random.default_rng(0)
        t = LabelEmbeddingTable(5, {f"t{i}": rng.normal(size=5) for i in range(4)})
        back = load_embeddings(dump_embeddings(t))
        for k, v in t.entries.items():
            assert back[k].tobytes() == v.tobytes()


class TestLabelVector:
    def test_single_token(self):
        np.testing.assert_array_equal(label_vector("on", table(on=[1.0, 0.0])), [1.0, 0.0])

    def test_multi_token_mean(self):
        t = table(walking=[1.0, 0.0], on=[0.0, 1.0])
        np.testing.assert_array_equal(label_vector("walking on", t), [0.5, 0.5])

    def test_missing_token_names_token_and_label(self):
        t = table(on=[0.0, 1.0])
        with pytest.raises(MissingTokenError) as info:
            label_vector("lying on", t)
        assert info.value.token == "lying"
        assert "lying on" in str(info.value)


class TestBuildCostMatrix:
    def test_identical_orthogonal_antipodal(self):
        t = table(a=[1.0, 0.0], b=[2.0, 0.0], c=[0.0, 3.0], d=[-1.0, 0.0])
        C = build_cost_matrix(LabelSet(("a", "b", "c", "d")), t).entries
        assert C[0, 1] == 0.0
        assert C[0, 2] == 1.0
        assert C[0, 3] == 2.0

    def test_three_label_background_example(self):
        t = table(on=[1.0, 0.0], riding=[0.0, 1.0])
        C = build_cost_matrix(LabelSet.from_names(["background", "on", "riding"], "background"), t)
        np.testing.assert_array_equal(C.entries, [[0, 1, 1], [1, 0, 1], [1, 1, 0]])
        assert C.row_labels == C.col_labels == ("background", "on", "riding")

    def test_golden_file(self):
        labels = LabelSet.from_names((DATA / "toy_labels.txt").read_text().splitlines(), "background")
        t = load_embeddings((DATA / "toy_embeddings.txt").read_bytes())
        buf = io.StringIO()
        write_cost_matrix_csv(build_cost_matrix(labels, t), buf)
        assert buf.getvalue() == (DATA / "toy_cost_matrix.csv").read_text()

    def test_background_uses_max_of_ordinary_entries(self):
        t = table(x=[1.0, 0.0], y=[1.0, 1.0], z=[0.0, 1.0])
        C = build_cost_matrix(LabelSet(("x", "background", "y", "z"), 1), t).entries
        M = 1.0  # x vs z are orthogonal; every other pair is closer
        assert np.all(C[1, [0, 2, 3]] == M)
        assert np.all(C[[0, 2, 3], 1] == M)
        assert C[1, 1] == 0.0

    def test_background_without_other_labels(self):
        C = build_cost_matrix(LabelSet(("background",), 0), table(on=[1.0])).entries
        assert C.tolist() == [[0.0]]

    def test_missing_token_propagates(self):
        with pytest.raises(MissingTokenError):
            build_cost_matrix(LabelSet(("on", "lying on")), table(on=[1.0, 0.0]))

    def test_label_set_validation(self):
        with pytest.raises(ValueError):
            LabelSet(("on", "ON"))
        with pytest.raises(ValueError):
            LabelSet(("on",), background_index=3)
        with pytest.raises(ValueError):
            LabelSet.from_names(["on"], "background")

    def test_csv_round_trip_is_exact(self):
        rng = np.random.default_rng(3)
        labels, tab = random_setup(rng, 12)
        C = build_cost_matrix(labels, tab)
        buf = io.StringIO()
        write_cost_matrix_csv(C, buf)
        back = read_cost_matrix_csv(io.StringIO(buf.getvalue()))
        assert back == C


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 15), dim=st.integers(1, 6), bg=st.booleans())
def test_cost_matrix_invariants(seed, n, dim, bg):
    rng = np.random.default_rng(seed)
    labels, tab = random_setup(rng, n, dim, background=bg)
    C = build_cost_matrix(labels, tab).entries
    assert np.array_equal(C, C.T)
    assert np.all(np.diag(C) == 0.0)
    assert np.all((C >= 0) & (C <= 2))
    if bg:
        M = C[1:, 1:].max()
        assert np.all(C[0, 1:] == M) and np.all(C[1:, 0] == M)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 12))
def test_permutation_equivariance(seed, n):
    rng = np.random.default_rng(seed)
    labels, tab = random_setup(rng, n)
    C = build_cost_matrix(labels, tab).entries
    perm = rng.permutation(n)
    permuted = LabelSet(tuple(labels.labels[i] for i in perm), int(np.flatnonzero(perm == 0)[0]))
    Cp = build_cost_matrix(permuted, tab).entries
    np.testing.assert_allclose(Cp, C[np.ix_(perm, perm)], rtol=0, atol=1e-15)
