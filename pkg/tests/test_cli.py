import io
import json
import math

import pytest

from packperc.cli import main, parse_grid, parse_p
from packperc.geometry import Packing


def run(*args):
    out = io.StringIO()
    code = main(list(args), out)
    return code, out.getvalue()


def test_parse_helpers():
    assert parse_p("e-26") == math.exp(-26)
    assert parse_p("exp(-2)") == math.exp(-2)
    assert parse_p("0.25") == 0.25
    assert parse_grid("0.1:0.3:0.1") == pytest.approx([0.1, 0.2, 0.3])
    assert parse_grid("0.5, e-1") == [0.5, math.exp(-1)]


def test_certify_default_constant():
    code, text = run("certify", "--p", "e-26")
    assert code == 0
    doc = json.loads(text)
    assert doc["overall"] and len(doc["entries"]) == 4
    assert all(e["margin"] > 0 for e in doc["entries"])


def test_certify_failure_and_general():
    code, text = run("certify", "--p", "0.1")
    assert code == 1 and not json.loads(text)["overall"]
    code, text = run("certify", "--d", "3", "--epsilon", "1")
    assert code == 0 and json.loads(text)["d"] == 3
    code, text = run("certify", "--d", "200", "--epsilon", "1")
    assert code == 3 and text == ""


def test_estimate_triangular_rhombus():
    code, text = run("estimate", "--family", "triangular", "--n", "16", "--event", "crossing", "--p", "0.5",
                     "--trials", "10000", "--seed", "7")
    assert code == 0
    rec = json.loads(text)
    assert abs(rec["phat"] - 0.5) <= 0.02
    assert rec["trials"] == 10000 and rec["seed"] == 7


def test_malformed_config_exits_2_without_output(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("family = triangular\nbogus = 1\n")
    assert run("estimate", "--config", str(cfg), "--p", "0.5", "--seed", "1") == (2, "")
    cfg.write_text("this line has no equals sign\n")
    assert run("estimate", "--config", str(cfg)) == (2, "")
    assert run("estimate", "--family", "triangular", "--n", "4", "--p", "0.5") == (2, "")  # no seed
    assert run("estimate", "--family", "nope", "--p", "0.5", "--seed", "1") == (2, "")
    assert run("estimate", "--family", "triangular", "--n", "4", "--p", "1.5", "--seed", "1") == (2, "")
    assert run("no-such-command")[0] == 2


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# rhombus\nfamily = triangular\nn = 6\np = 0.2\ntrials = 200\nseed = 5\n")
    _, a = run("estimate", "--config", str(cfg))
    _, b = run("estimate", "--config", str(cfg), "--p", "0.8")
    assert json.loads(a)["p"] == 0.2 and json.loads(b)["p"] == 0.8
    _, c = run("estimate", "--family", "triangular", "--n", "6", "--p", "0.2", "--trials", "200", "--seed", "5")
    assert a == c


def test_capacity_error_exit_code():
    assert run("generate", "--family", "triangle-times-n", "--levels", "400") == (4, "")
    assert run("generate", "--family", "bond-counterexample", "--M", "4000", "--n", "2") == (4, "")


def test_generate_round_trip_and_edges():
    code, text = run("generate", "--family", "moore", "--n", "3")
    assert code == 0
    assert len(Packing.from_json(text)) == 9
    code, text = run("generate", "--family", "moore", "--n", "2", "--edges", "true")
    assert text.splitlines() == ["0,1", "0,2", "0,3", "1,2", "1,3", "2,3"]


def test_sweep_csv_and_json():
    base = ["sweep", "--family", "moore", "--n", "8", "--p-grid", "0.2:0.8:0.3", "--trials", "100", "--seed", "2"]
    code, text = run(*base)
    recs = [json.loads(line) for line in text.splitlines()]
    assert code == 0 and [r["p"] for r in recs] == pytest.approx([0.2, 0.5, 0.8])
    code, text = run(*base, "--format", "csv")
    lines = text.splitlines()
    assert lines[0] == "event,p,trials,hits,phat,ci_lo,ci_hi,seed" and len(lines) == 4


def test_percolate_single_trial_reproducible():
    args = ["percolate", "--family", "triangular", "--n", "5", "--p", "0.5", "--seed", "3", "--trial", "9",
            "--bits", "true"]
    code, a = run(*args)
    _, b = run(*args)
    assert code == 0 and a == b
    rec = json.loads(a)
    assert len(rec["bits"]) == 25 and rec["open"] == rec["bits"].count("1")


def test_pack_from_rotation_file(tmp_path):
    f = tmp_path / "k4.json"
    # K4 with vertex 3 inside triangle 0 1 2, neighbours listed counter-clockwise
    f.write_text(json.dumps({"rotation": [[1, 3, 2], [2, 3, 0], [0, 3, 1], [0, 1, 2]]}))
    svg = tmp_path / "k4.svg"
    code, text = run("pack", "--input", str(f), "--svg", str(svg))
    assert code == 0
    P = Packing.from_json(text)
    assert P.meta["tangency_residual"] <= 1e-6
    assert svg.read_text().startswith("<svg")


def test_estimate_identical_across_workers():
    outs = {run("estimate", "--family", "triangular", "--n", "10", "--p", "0.5", "--trials", "3000", "--seed", "11",
                "--workers", str(w))[1] for w in (1, 4, 8)}
    assert len(outs) == 1
