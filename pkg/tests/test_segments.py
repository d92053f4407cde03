import numpy as np
import pytest

from ctxhar.segments import (
    SegmentTable,
    ingest_dataset,
    parse_dataset,
    split_by_recording,
    table_to_csv,
    write_dataset,
)
from ctxhar.simgen import default_scenario, generate


@pytest.fixture(scope="module")
def data():
    return generate(default_scenario(seed=3, n_recordings=5, length=40))


def test_csv_round_trip(tmp_path, data):
    path = tmp_path / "d.csv"
    write_dataset(data, path)
    back = ingest_dataset(path)
    assert back.equals(data)
    assert table_to_csv(back) == path.read_text()


def test_csv_without_attributes():
    t = SegmentTable([0, 0], [0, 1], [1, 0], [2, 1], np.array([[0.25, 0.5], [1.0, 0.0]]))
    back = parse_dataset(table_to_csv(t))
    assert back.attributes is None and back.equals(t)


def test_out_of_range_posterior_names_line():
    text = "recording,frame,step,class,pi_1\n0,0,0,0,0.5\n0,1,0,0,1.3\n"
    with pytest.raises(ValueError, match="line 3"):
        parse_dataset(text)


def test_malformed_row_and_empty_data():
    with pytest.raises(ValueError, match="line 2"):
        parse_dataset("recording,frame,step,class,pi_1\n0,x,0,0,0.5\n")
    with pytest.raises(ValueError, match="no segments"):
        parse_dataset("recording,frame,step,class,pi_1\n")
    with pytest.raises(ValueError, match="header"):
        parse_dataset("rec,frame,step,class,pi_1\n0,0,0,0,0.5\n")
    with pytest.raises(ValueError, match="out of range"):
        parse_dataset("recording,frame,step,class,pi_1\n0,0,5,0,0.5\n", n_steps=5)


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        ingest_dataset("/nonexistent/data.csv")


def test_split_is_by_recording(data):
    train, test = split_by_recording(data, 0.7, seed=1)
    assert set(train.recording_ids()).isdisjoint(test.recording_ids())
    assert len(train) + len(test) == len(data)
    again = split_by_recording(data, 0.7, seed=1)
    assert again[0].equals(train)


def test_recordings_and_iteration(data):
    rows = data.recordings()
    assert len(rows) == 5 and all(len(r) == 40 for r in rows)
    seg = next(iter(data))
    assert seg.recording == 0 and seg.frame == 0 and seg.pi.shape == (6,)
