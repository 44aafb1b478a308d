import json
from fractions import Fraction

import numpy as np
import pytest

from fracapprox.io import fmt, plain, read_config, read_csv, write_csv, write_json


def test_fmt_round_trips():
    for x in [0.1, 1 / 3, np.pi, 1e-300, -2.5e17]:
        assert float(fmt(x)) == x
    assert fmt(np.int64(3)) == "3"
    assert fmt(True) == "1"
    assert len(fmt(1 / 3).replace("0.", "")) == 17


def test_csv_round_trip(tmp_path):
    path = write_csv(tmp_path / "a" / "b.csv", ["t", "v"], [(0.1, 1 / 3), (2, np.e)])
    header, data = read_csv(path)
    assert header == ["t", "v"]
    assert data.tolist() == [[0.1, 1 / 3], [2.0, np.e]]
    with pytest.raises(ValueError):
        write_csv(tmp_path / "c.csv", ["t"], [(1, 2)])


def test_plain_and_json_order(tmp_path):
    obj = {"z": np.float64(1.5), "a": np.arange(2), "q": Fraction(15, 14),
           "bad": float("nan"), "flag": np.bool_(True)}
    assert plain(obj) == {"z": 1.5, "a": [0, 1], "q": "15/14", "bad": "nan", "flag": True}
    text = write_json(tmp_path / "m.json", obj).read_text()
    assert list(json.loads(text)) == ["z", "a", "q", "bad", "flag"]


def test_read_config(tmp_path):
    path = tmp_path / "cfg.txt"
    path.write_text("# comment\nt-max = 3  # trailing\nalphas = 0.5, 1.5\nflag = true\n"
                    "name = exact\nq = 1/3\n")
    cfg = read_config(path)
    assert cfg == {"t_max": 3, "alphas": (0.5, 1.5), "flag": True, "name": "exact",
                   "q": pytest.approx(1 / 3)}
    path.write_text("no equals sign\n")
    with pytest.raises(ValueError):
        read_config(path)
