import json
import subprocess
import sys

import numpy as np
import pytest

from blax import io as bio
from blax.cli import main
from blax.errors import InputError
from blax.onezero import OneZeroSpec, oracle_pair
from blax.report import Report
from blax.statespace import StageColligation, random_pair


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture
def onezero_json(tmp_path):
    return _write(tmp_path / "onezero.json", bio.encode_pair(oracle_pair(OneZeroSpec(0.5, 2))))


def test_cmatrix_roundtrip():
    M = np.array([[1 + 2j, -0.5], [0, 3e-17j]])
    np.testing.assert_array_equal(bio.decode_cmatrix(bio.encode_cmatrix(M)), M)


def test_pair_and_stage_roundtrip():
    pair = random_pair(np.random.default_rng(0))
    back = bio.decode_pair(json.loads(bio.dumps(bio.encode_pair(pair))))
    np.testing.assert_array_equal(back.A, pair.A)
    np.testing.assert_array_equal(back.C, pair.C)
    assert back.n == pair.n
    st = StageColligation(3, np.ones((2, 1)), 1j * np.ones((1, 1)))
    st2 = bio.decode_stage(bio.encode_stage(st))
    assert st2.k == 3 and np.array_equal(st2.D, st.D)


@pytest.mark.parametrize(
    "obj, field",
    [
        ({"n": 2, "A": {"rows": 1, "cols": 1, "entries": []}, "C": {"rows": 1, "cols": 1, "entries": [[1, 0]]}},
         "pair.A.entries"),
        ({"n": 0, "A": {"rows": 1, "cols": 1, "entries": [[0, 0]]}, "C": {"rows": 1, "cols": 1, "entries": [[1, 0]]}},
         "pair.n"),
        ({"n": 2, "A": {"rows": 1, "cols": 1, "entries": [[0, 0]]}}, "pair.C"),
        ({"n": 2, "A": {"rows": 1, "cols": 1, "entries": [["x", 0]]}, "C": {"rows": 1, "cols": 1, "entries": [[1, 0]]}},
         "pair.A.entries[0][0]"),
    ],
)
def test_decode_errors_name_the_field(obj, field):
    with pytest.raises(InputError, match=field.replace("[", r"\[").replace("]", r"\]")):
        bio.decode_pair(obj)


def test_report_encoding_is_sorted_and_deterministic():
    rep = Report()
    rep.add("zeta", 1e-12, 1e-10)
    rep.add("alpha", np.float64(2e-12), 1e-10)
    enc = bio.encode_report(rep)
    assert enc["schema"] == 1 and enc["pass"] is True
    assert [c["name"] for c in enc["checks"]] == ["alpha", "zeta"]
    assert bio.dumps(enc) == bio.dumps(bio.encode_report(rep))


def test_read_input_csv(tmp_path):
    p = tmp_path / "u.csv"
    p.write_text("j,re_u0,im_u0\n0,1,0\n1,0,0\n2,0,-1\n")
    u = bio.read_input_csv(str(p))
    assert len(u) == 3 and u[0][0] == 1 and u[2][0] == -1j
    p.write_text("0,1,0\n2,0,-1\n")
    with pytest.raises(InputError, match="missing time index 1"):
        bio.read_input_csv(str(p))
    p.write_text("0,1\n")
    with pytest.raises(InputError, match=r"input\[row 1\]"):
        bio.read_input_csv(str(p))


def test_cli_blrep_approaches(onezero_json, capsys):
    for approach in (1, 3, 4):
        assert main(["blrep", "--approach", str(approach), "--pair", onezero_json, "-K", "4", "-N", "64"]) == 0
    out = capsys.readouterr().out
    assert '"pass": true' in out
    assert main(["blrep", "--approach", "2", "--pair", onezero_json, "-N", "40"]) == 0


def test_cli_approach2_without_theta_for_general_pair(tmp_path):
    pair = random_pair(np.random.default_rng(1), d=2, p=2)
    path = _write(tmp_path / "p.json", bio.encode_pair(pair))
    assert main(["blrep", "--approach", "2", "--pair", path, "-N", "40"]) == 2


def test_cli_malformed_input_exits_2(tmp_path, capsys):
    bad = _write(tmp_path / "bad.json", {"n": 2, "A": {"rows": 1, "cols": 1, "entries": []},
                                          "C": {"rows": 1, "cols": 1, "entries": [[1, 0]]}})
    assert main(["gramian", "--pair", bad]) == 2
    assert "pair.A.entries" in capsys.readouterr().err
    assert main(["gramian", "--pair", str(tmp_path / "missing.json")]) == 2
    assert main(["oracle", "--alpha", "1.5,0"]) == 2
    assert main(["series", "-K", "8", "-N", "10"]) == 2
    assert main(["no-such-command"]) == 2


def test_cli_series_and_gramian(onezero_json, tmp_path):
    assert main(["series", "--n", "2", "--k", "3", "--z", "0.5,0"]) == 0
    assert main(["gramian", "--pair", onezero_json, "-K", "2", "--kernel", "kM",
                 "--kernel-csv", str(tmp_path / "k.csv")]) == 0
    lines = (tmp_path / "k.csv").read_text().splitlines()
    assert lines[0].startswith("re_z,im_z,re_zeta,im_zeta")
    assert len(lines) == 1 + 17**2


def test_cli_simulate(onezero_json, tmp_path, capsys):
    fam = tmp_path / "fam.json"
    assert main(["inner-family", "--pair", onezero_json, "-K", "5", "-N", "64", "-o", str(fam)]) == 0
    spec = json.loads(fam.read_text())
    spec["x0"] = bio.encode_cmatrix([[1.0]])
    fam.write_text(json.dumps(spec))
    u = tmp_path / "u.csv"
    u.write_text("0,1,0\n1,0,0\n2,0,0\n3,0,1\n4,0,0\n5,0,0\n")
    capsys.readouterr()
    assert main(["simulate", "--spec", str(fam), "--input", str(u), "-T", "5", "-K", "5", "-N", "64"]) == 0
    rows = capsys.readouterr().out.strip().splitlines()
    assert rows[0].startswith("j,") and len(rows) == 7
    assert main(["simulate", "--spec", str(fam), "--input", str(u), "-T", "6", "-N", "64"]) == 2


def test_cli_oracle(capsys):
    assert main(["oracle", "--alpha", "0.5,0", "--n", "2", "-K", "4", "-N", "64"]) == 0
    assert '"pass": true' in capsys.readouterr().out


def test_cli_verify_all_deterministic_under_seed(tmp_path, monkeypatch):
    monkeypatch.setenv("BLAX_SEED", "3")
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["verify-all", "--seed", "99", "-o", str(a)]) == 0
    assert main(["verify-all", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    data = json.loads(a.read_text())
    assert data["pass"] is True and data["seed"] == 3


def test_console_script_runs(onezero_json):
    proc = subprocess.run([sys.executable, "-m", "blax.cli", "blrep", "--approach", "3", "--pair", onezero_json,
                           "-K", "4", "-N", "64"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["report"]["pass"] is True
