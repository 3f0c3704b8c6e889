import io

import numpy as np
import pytest

from otloss.cost_matrix import build_cost_matrix
from otloss.synth import Dataset, SynthConfig, generate, read_dataset_csv, write_dataset_csv, zipf_priors

SMALL = dict(n_train=3000, n_test=600)


def test_zero_exponent_gives_uniform_priors():
    np.testing.assert_allclose(zipf_priors(21, 0.0), 1 / 21, rtol=1e-15)


def test_same_seed_is_bit_identical():
    a = generate(SynthConfig(seed=5, **SMALL))
    b = generate(SynthConfig(seed=5, **SMALL))
    for da, db in zip(a[:2], b[:2]):
        assert da.features.tobytes() == db.features.tobytes()
        assert da.labels.tobytes() == db.labels.tobytes()
    assert all(a[2][k].tobytes() == b[2][k].tobytes() for k in a[2].entries)


def test_different_seeds_differ():
    a, _, _, _ = generate(SynthConfig(seed=1, **SMALL))
    b, _, _, _ = generate(SynthConfig(seed=2, **SMALL))
    assert not np.array_equal(a.features, b.features)


def test_frequencies_within_multinomial_bounds():
    cfg = SynthConfig(seed=0)
    train, _, _, _ = generate(cfg)
    N = cfg.n_train
    p = zipf_priors(cfg.n_classes, cfg.zipf_exponent)
    sigma = np.sqrt(N * p * (1 - p))
    assert train.class_frequencies.sum() == N
    assert np.all(np.abs(train.class_frequencies - N * p) <= 3 * sigma)


def test_long_tail_exists():
    cfg = SynthConfig(seed=0)
    train, _, _, _ = generate(cfg)
    f = train.class_frequencies
    assert f[0] / f[-1] >= cfg.n_classes ** cfg.zipf_exponent / 2


def test_embeddings_align_with_clusters():
    cfg = SynthConfig(seed=3)
    train, _, table, labels = generate(cfg)
    assert len(table) == cfg.n_classes and table.dimension == cfg.feature_dim
    assert labels.background_index == 0 and labels.labels[0] == "background"
    C = build_cost_matrix(labels, table).entries
    G = cfg.similarity_groups
    same, other = [], []
    for i in range(1, cfg.n_classes):
        for j in range(i + 1, cfg.n_classes):
            if (i - 1) % G == (j - 1) % G:
                same.append(C[i, j])
            else:
                other.append(C[i, j])
    assert max(same) < min(other)
    # embedding direction points at the empirical class mean
    for c in (1, 7, 20):
        m = train.features[train.labels == c].mean(axis=0)
        v = table[labels.labels[c]]
        assert m @ v / np.linalg.norm(m) > 0.95


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(n_classes=1),
        dict(n_train=5),
        dict(zipf_exponent=-1.0),
        dict(class_spread=0.0),
        dict(similarity_groups=0),
        dict(similarity_groups=21),
        dict(seed=-1),
    ],
)
def test_invalid_config(kwargs):
    with pytest.raises(ValueError):
        SynthConfig(**kwargs)


def test_csv_round_trip():
    train, _, _, _ = generate(SynthConfig(seed=4, n_train=200, n_test=50))
    buf = io.StringIO()
    write_dataset_csv(train, buf)
    text = buf.getvalue()
    assert text.splitlines()[0] == "label," + ",".join(f"f{i}" for i in range(1, 17))
    back = read_dataset_csv(io.StringIO(text), train.n_classes)
    assert back.features.tobytes() == train.features.tobytes()
    assert np.array_equal(back.labels, train.labels)


def test_csv_rejects_bad_input():
    with pytest.raises(ValueError, match="header"):
        read_dataset_csv(io.StringIO("y,f1\n0,1.0\n"), 2)
    with pytest.raises(ValueError, match="line 2"):
        read_dataset_csv(io.StringIO("label,f1\n0,abc\n"), 2)
    with pytest.raises(ValueError):
        read_dataset_csv(io.StringIO("label,f1\n5,1.0\n"), 2)


def test_dataset_invariants():
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 2)), np.array([0, 1]), 2)
    ds = Dataset(np.zeros((3, 2)), np.array([0, 1, 1]), 3)
    assert ds.class_frequencies.tolist() == [1, 2, 0]
