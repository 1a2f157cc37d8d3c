import json

from dynrcm import reports


def test_clean_handles_numpy_and_nonfinite():
    import numpy as np
    s = reports.dumps({"a": np.float64("nan"), "b": np.arange(2), "c": np.inf, "d": np.bool_(True)})
    assert json.loads(s) == {"a": "nan", "b": [0, 1], "c": "inf", "d": True}


def test_report_round_trip_and_timestamp_strip(tmp_path):
    r = reports.Report(tmp_path, "x", {"seed": 1}, timestamp="T1")
    r.add({"check": "a", "v": 1.5})
    assert not r.hard("an inequality", False, lhs=2)
    r.csv("x.csv", ["a", "b"], [(1, 0.1)])
    p = r.write()
    recs = reports.read_jsonl(p)
    assert recs[0]["timestamp"] == "T1" and recs[0]["config"] == {"seed": 1}
    assert recs[-1]["exit_status"] == 1 and recs[-1]["hard_failures"] == ["an inequality"]
    r2 = reports.Report(tmp_path / "b", "x", {"seed": 1}, timestamp="T2")
    r2.add({"check": "a", "v": 1.5})
    r2.hard("an inequality", False, lhs=2)
    r2.files.append("x.csv")
    p2 = r2.write()
    assert p.read_text() != p2.read_text()
    assert reports.strip_timestamp(p.read_text()) == reports.strip_timestamp(p2.read_text())
    assert (tmp_path / "x.csv").read_text() == "a,b\n1,0.1\n"
