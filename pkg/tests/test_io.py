import json

import numpy as np
import pytest

from koopgen import io
from koopgen.datagen import GenConfig, SamplePlan, generate
from koopgen.dictionary import monomials_2d
from koopgen.dynamics import Flow, vanderpol
from koopgen.errors import BasisMismatch, IntegrityError


@pytest.fixture
def saved(tmp_path):
    d = monomials_2d(3, 2)
    ts = generate(Flow(vanderpol()), d, SamplePlan(((-1, 1), (-1, 1)), 5), GenConfig(1e4, 1.0))
    io.save_training_set(ts, tmp_path / "ds", d)
    return ts, d, tmp_path / "ds"


def test_csv_round_trip_exact(tmp_path):
    A = np.random.default_rng(0).normal(size=(7, 3)) * 10.0 ** np.arange(-150, 150, 100)
    io.write_csv(tmp_path / "a.csv", A)
    assert io.read_csv(tmp_path / "a.csv").tobytes() == A.tobytes()


def test_table_csv_layout(tmp_path):
    table = np.arange(12.0).reshape(4, 3)
    table[0, 0] = np.nan
    io.write_table_csv(tmp_path / "t.csv", table)
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "z_ij,j=0,j=1,j=2" and lines[1].startswith("i=0,,")
    back = io.read_table_csv(tmp_path / "t.csv")
    assert np.isnan(back[0, 0]) and np.array_equal(back[1:], table[1:])


def test_training_set_round_trip(saved):
    ts, d, path = saved
    ts2, d2, manifest = io.load_training_set(path)
    assert ts2.X.tobytes() == ts.X.tobytes() and ts2.Y.tobytes() == ts.Y.tobytes()
    assert d2 == d and ts2.config == ts.config and manifest["shape"] == [25, 12]


def test_save_is_byte_reproducible(saved, tmp_path):
    ts, d, path = saved
    io.save_training_set(ts, tmp_path / "again", d)
    for name in ("X.csv", "Y.csv", "samples.csv", "manifest.json"):
        assert (path / name).read_bytes() == (tmp_path / "again" / name).read_bytes()


def test_tampered_file_detected(saved):
    _, _, path = saved
    with open(path / "Y.csv", "a") as fh:
        fh.write("0\n")
    with pytest.raises(IntegrityError):
        io.load_training_set(path)


def test_tampered_dictionary_detected(saved):
    _, _, path = saved
    m = json.loads((path / "manifest.json").read_text())
    m["dictionary"]["entries"][3]["terms"][0][1] = [0, 3]
    (path / "manifest.json").write_text(json.dumps(m))
    with pytest.raises(BasisMismatch):
        io.load_training_set(path)


def test_not_a_training_set(tmp_path):
    with pytest.raises(IntegrityError):
        io.load_training_set(tmp_path)
    (tmp_path / "manifest.json").write_text('{"format": "other"}')
    with pytest.raises(IntegrityError):
        io.load_training_set(tmp_path)
