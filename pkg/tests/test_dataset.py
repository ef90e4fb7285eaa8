import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uboundary.dataset import Dataset, DatasetError, Sample, load_csv, save_csv, split


def write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_counts(tmp_path):
    d = load_csv(write(tmp_path, "score,uncertainty,label\n0.9,0.1,1\n0.2,0.5,0\n"))
    assert (d.n_total, d.n_positive) == (2, 1)
    assert d[0] == Sample(0.9, 0.1, 1)
    assert list(d) == d.samples


def test_empty_data_section(tmp_path):
    with pytest.raises(DatasetError, match="empty dataset"):
        load_csv(write(tmp_path, "score,uncertainty,label\n"))


def test_bad_label_names_line(tmp_path):
    with pytest.raises(DatasetError, match="line 3"):
        load_csv(write(tmp_path, "score,uncertainty,label\n0.5,0,1\n0.5,0,2\n"))


@pytest.mark.parametrize(
    "row, message",
    [
        ("1.5,0,1", "outside"),
        ("0.5,nan,1", "finite"),
        ("0.5,inf,1", "finite"),
        ("abc,0,1", "line 2"),
        ("0.5,0", "3 fields"),
    ],
)
def test_malformed_rows(tmp_path, row, message):
    with pytest.raises(DatasetError, match=message):
        load_csv(write(tmp_path, f"score,uncertainty,label\n{row}\n"))


def test_bad_header(tmp_path):
    with pytest.raises(DatasetError, match="header"):
        load_csv(write(tmp_path, "s,u,y\n0.5,0,1\n"))


def test_negative_uncertainty_allowed():
    # differential entropy is negative for concentrated posteriors
    d = Dataset([0.5], [-3.2], [1])
    assert d.uncertainties[0] == -3.2


def test_arrays_read_only():
    d = Dataset([0.5, 0.6], [0.0, 1.0], [0, 1])
    with pytest.raises(ValueError):
        d.scores[0] = 1.0


finite = st.floats(-1e6, 1e6, allow_nan=False)
rows = st.lists(st.tuples(st.floats(0, 1), finite, st.integers(0, 1)), min_size=1, max_size=40)


@settings(max_examples=50, deadline=None)
@given(rows)
def test_csv_round_trip_is_exact(tmp_path_factory, data):
    path = tmp_path_factory.mktemp("rt") / "d.csv"
    d = Dataset.from_samples(data)
    save_csv(d, path)
    back = load_csv(path)
    assert back.samples == d.samples
    save_csv(back, path.with_name("again.csv"))
    assert path.read_bytes() == path.with_name("again.csv").read_bytes()


def test_split_halves_disjoint_and_deterministic():
    rng = np.random.default_rng(0)
    d = Dataset(rng.uniform(size=100), np.arange(100.0), rng.integers(0, 2, 100))
    hold, test = split(d, (0.5, 0.5), seed=7)
    assert hold.n_total == test.n_total == 50
    # uncertainties are unique ids here
    assert not set(hold.uncertainties) & set(test.uncertainties)
    assert set(hold.uncertainties) | set(test.uncertainties) == set(d.uncertainties)
    again = split(d, (0.5, 0.5), seed=7)
    assert again[0].samples == hold.samples
    assert split(d, (0.5, 0.5), seed=8)[0].samples != hold.samples


@pytest.mark.parametrize("fractions", [(0.0, 1.0), (0.6, 0.6), (-0.5, 1.5)])
def test_split_rejects_fractions(fractions):
    d = Dataset([0.5] * 4, [0.0] * 4, [1, 0, 1, 0])
    with pytest.raises(DatasetError):
        split(d, fractions, 0)


def test_crlf_input(tmp_path):
    path = tmp_path / "crlf.csv"
    path.write_bytes(b"score,uncertainty,label\r\n0.25,-1.5,1\r\n1.0,0,0\r\n")
    d = load_csv(path)
    assert d.samples == [Sample(0.25, -1.5, 1), Sample(1.0, 0.0, 0)]


def test_split_preserves_multiset():
    d = Dataset([0.1, 0.1, 0.5, 0.9, 0.9], [0.0] * 5, [0, 0, 1, 1, 0])
    hold, test = split(d, (0.4, 0.6), seed=1)
    assert sorted(hold.samples + test.samples) == sorted(d.samples)
