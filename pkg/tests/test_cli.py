import csv
import io
import json
import subprocess
import sys
from fractions import Fraction as Fr

import pytest

from hetcache.cli import alpha_profile, main, parse_range


def run(argv):
    buf = io.StringIO()
    code = main(argv, buf)
    return code, buf.getvalue()


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_parse_range_inclusive_exact():
    assert parse_range("0.3:1.0:0.05")[-1] == 1
    assert len(parse_range("0.3:1.0:0.05")) == 15
    assert parse_range("11:201:10") == list(range(11, 202, 10))
    assert parse_range("5:4:1") == []
    assert alpha_profile(Fr(1, 2), Fr(1, 5), 3) == (Fr(1, 20), Fr(1, 10), Fr(1, 5))


def test_alpha_sweep_csv():
    code, out = run(["load-sweep", "--K", "3", "--N", "4", "--alpha-range", "0.3:1.0:0.05", "--mK", "0.3"])
    assert code == 0
    rs = rows(out)
    assert len(rs) == 15
    assert rs[-1]["param"] == "1" and rs[-1]["gap"] == "0"
    assert rs[0]["m3"] == "3/10" and rs[0]["m1"] == str(Fr(3, 10) * Fr(9, 100))


def test_n_sweep_gap_decreasing():
    code, out = run(["load-sweep", "--K", "10", "--alpha", "0.7", "--mK", "0.1", "--N-range", "11:201:10"])
    assert code == 0
    gaps = [Fr(r["gap"]) for r in rows(out)]
    assert len(gaps) == 20
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


def test_empty_range_gives_header_only():
    code, out = run(["load-sweep", "--K", "3", "--N", "4", "--alpha-range", "0.9:0.5:0.1", "--mK", "0.3"])
    assert code == 0 and out == "param,m1,m2,m3,region,R_coded,R_uncoded,gap\n"


def test_csv_byte_identical_and_out_file(tmp_path):
    argv = ["load-sweep", "--K", "4", "--N-range", "5:9:1", "--m", "0.1,0.15,0.2,0.25"]
    a, b = run(argv)[1], run(argv)[1]
    assert a == b
    path = tmp_path / "o.csv"
    assert run(argv + ["--out", str(path)]) == (0, "")
    assert path.read_bytes() == a.encode()


def test_decimal_flag():
    code, out = run(["load-sweep", "--K", "4", "--N", "5", "--m", "0.1,0.15,0.2,0.25", "--decimal"])
    r = rows(out)[0]
    assert r["m2"] == "0.15" and r["R_coded"] == "2.25" and r["R_uncoded"] == "2.5"


def test_decimal_input_parses_exactly():
    code, out = run(["load-sweep", "--K", "4", "--N", "5", "--m", "0.1,0.15,0.2,0.25"])
    r = rows(out)[0]
    assert r["m2"] == "3/20" and r["R_coded"] == "9/4" and r["R_uncoded"] == "5/2"


def test_verify_examples():
    code, out = run(["verify", "--K", "3", "--N", "4", "--m", "9/20,1/2,11/20"])
    assert code == 0 and "R=25/36" in out and out.rstrip().endswith("PASS")
    code, out = run(["verify", "--K", "4", "--N", "5", "--m", "0.1,0.15,0.2,0.25", "--csv"])
    assert code == 0 and "R=9/4" in out and out.rstrip().endswith(",pass")


def test_verify_out_of_scheme_exit_2(capsys):
    code, out = run(["verify", "--K", "3", "--N", "4", "--m", "0.5,0.7,0.9"])
    assert code == 2 and out == ""
    assert "m1+m2" in capsys.readouterr().err


def test_verify_failure_exit_1():
    code, out = run(["verify", "--K", "3", "--N", "4", "--m", "1/5,3/5,3/5", "--demands", "distinct"])
    assert code == 1 and out.rstrip().endswith("FAIL")


@pytest.mark.parametrize(
    "argv",
    [
        ["verify", "--K", "3", "--N", "4"],
        ["verify", "--K", "3", "--N", "4", "--m", "0.3,0.2,0.1"],
        ["load-sweep", "--K", "3", "--N", "4"],
        ["load-sweep", "--K", "4", "--N", "5", "--m", "0.3,0.3,0.3,0.3", "--alpha", "0.5", "--mK", "0.3"],
        ["verify", "--config", "/nonexistent/file.json"],
        ["plan", "--K", "4", "--N", "5", "--m", "0.3,0.3,0.3,0.3"],
    ],
)
def test_usage_errors_exit_2(argv):
    assert run(argv)[0] == 2


def test_plan_tag_counts():
    code, out = run(["plan", "--K", "3", "--N", "4", "--m", "3/10,7/10,19/20"])
    assert code == 0 and "subfiles per file: 5" in out and "min_F=10" in out
    code, out = run(["plan", "--K", "3", "--N", "4", "--m", "0,0,0"])
    assert "subfiles per file: 1" in out
    code, out = run(["plan", "--K", "4", "--N", "5", "--m", "0.1,0.15,0.2,0.25"])
    assert "subfiles per file: 11" in out


def test_config_file_and_env_seed(tmp_path, monkeypatch):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"K": 3, "N": 4, "m": ["1/5", "2/5", "3/5"]}))
    code, base = run(["verify", "--config", str(path), "--csv"])
    assert code == 0
    code, flags = run(["verify", "--K", "3", "--N", "4", "--m", "1/5,2/5,3/5", "--csv"])
    assert base == flags
    monkeypatch.setenv("HETCACHE_SEED", "17")
    assert run(["verify", "--config", str(path)])[0] == 0
    monkeypatch.setenv("HETCACHE_SEED", "x")
    assert run(["verify", "--config", str(path)])[0] == 2


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "hetcache", "plan", "--K", "3", "--N", "4", "--m", "9/20,1/2,11/20"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0 and "region: II" in proc.stdout
