import io
import json
import subprocess
import sys

import pytest

from demvar.cli import export_qp, run

from conftest import CORPUS, load


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def path(name):
    return str(CORPUS / f"{name}.mdp")


def test_maxvar_json():
    code, out, _ = call("maxvar", path("fig1_n"), "--rational")
    assert code == 0
    d = json.loads(out)
    assert d["maxvar"] == 4 and d["demvar"] == 5 and d["nds"] == 0.25
    assert d["diagnostics"]["exact"]["nds"] == "1/4"


def test_output_is_deterministic():
    assert call("nds", path("fig2b"))[1] == call("nds", path("fig2b"))[1]


def test_no_json_summary():
    code, out, _ = call("nds", path("fig1_n"), "--no-json")
    assert code == 0 and "nds: 0.25" in out


def test_validate_and_preprocess():
    code, out, _ = call("validate", path("tm1"))
    assert code == 0 and json.loads(out)["valid"] is True
    code, out, _ = call("preprocess", path("fig1_n"))
    assert code == 0 and out.startswith("MDP\n") and "tstar" in out


def test_exit_codes(tmp_path):
    assert call("maxvar", str(tmp_path / "missing.mdp"))[0] == 1
    bad = tmp_path / "bad.mdp"
    bad.write_text("MDP\nSTATE s\nINIT s\nTRANS s a -> s:1/2\n")
    code, _, err = call("maxvar", str(bad))
    assert code == 1 and "line 4" in err
    flat = tmp_path / "flat.mdp"
    flat.write_text("MDP\nSTATE s\nSTATE t ABSORBING WEIGHT 2\nINIT s\nTRANS s a -> t:1\n")
    code, _, err = call("nds", str(flat))
    assert code == 2 and "maximal variance must be positive" in err
    assert call("maxvar", str(flat))[0] == 0
    inf = tmp_path / "inf.mdp"
    inf.write_text("MDP\nSTATE s\nSTATE t ABSORBING\nINIT s\n"
                   "TRANS s spin REWARD 1 -> s:1\nTRANS s stop -> t:1\n")
    assert call("maxvar", str(inf))[0] == 2
    assert call("maxvar", path("tm1"), "--max-unfold-states", "3")[0] == 3


def test_chebyshev_flags():
    code, out, _ = call("chebyshev", path("fig1_n"), "--k", "2", "--k", "4")
    rows = json.loads(out)["chebyshev"]
    assert [r["k"] for r in rows] == [2, 4]
    assert rows[0]["bound"] == 0.5


def test_simulate():
    code, out, _ = call("simulate", path("fig1_n"), "--samples", "20000", "--seed", "3")
    d = json.loads(out)
    assert code == 0 and abs(d["estimate"] - 5) < 5 * d["stderr"]
    k2 = next(r for r in d["chebyshev"] if r["k"] == 2)
    assert k2["empirical"] == 0


def test_oracle_command():
    for name in ("fig2c", "acc_memory"):
        code, out, _ = call("oracle", path(name), "--rational")
        d = json.loads(out)
        assert code == 0 and d["maxvar_gap"] == 0 and d["demvar_gap"] == 0


def test_bound_override():
    code, out, _ = call("maxvar", path("acc_geom"), "--bound", "3")
    assert code == 0 and json.loads(out)["heuristic_bound"] is True


def test_export_qp_weighted():
    text = export_qp(load("fig1_n"), "demonic")
    assert "flow[s_init]: 1*x[s_init,alpha] + 1*x[s_init,beta] + 1*x[s_init,gamma] = 1" in text
    assert "mom_e1: 4*y[w4] + 4*y[w4b] + -1*e1 = 0" in text
    assert "0.5*16*y[w4]*y'[w0]" in text
    assert "max: e2 - e1*e1" in export_qp(load("fig1_n"), "max")


def test_export_qp_reward():
    text = export_qp(load("tm1"), "demonic")
    assert "max: e2 - 2*e1*e1' + e2'" in text
    assert "# demonic variance = 0.5 * objective" in text


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "demvar", "maxvar", path("fig2d")],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["demvar"] == 4.5
