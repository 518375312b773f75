import json
from io import StringIO

import pytest

from dquant import io
from dquant.cli import main


def run(*argv):
    out, err = StringIO(), StringIO()
    rc = main(list(argv), stdout=out, stderr=err)
    return rc, out.getvalue(), err.getvalue()


def test_mul_example():
    rc, out, _ = run("mul", "--product", "moyal", "--dof", "1", "--order", "3", "q", "p")
    assert rc == 0 and out.strip() == "q*p + (1)*L"


def test_mul_json_roundtrips():
    rc, out, _ = run("--format", "json", "mul", "--order", "3", "q^2", "p^2")
    assert rc == 0
    doc = io.loads(out, "series")
    s = io.series_from_doc(doc)
    assert str(s.coeff(2)) == "2"


def test_spectrum_and_count_examples():
    assert run("spectrum", "--dof", "1", "--nmax", "2")[1].strip() == "1/2*h, 3/2*h, 5/2*h"
    assert run("kgraphs", "enumerate", "--n", "2", "--count-only")[1].strip() == "36"


def test_parse_error_code():
    rc, _, err = run("mul", "q +", "p")
    assert rc == 2 and "parse error" in err


def test_unknown_flag_rejected():
    assert run("mul", "--bogus", "q", "p")[0] == 2


def test_resource_bound():
    assert run("mul", "--order", "99", "q", "p")[0] == 4
    assert run("spectrum", "--nmax", "1000")[0] == 4


def test_assoc_scan_all_zero():
    rc, out, _ = run("--format", "json", "assoc", "--order", "3")
    assert rc == 0
    doc = json.loads(out)
    assert doc["schema"] == "dq/1"


def test_bracket_and_starexp():
    rc, out, _ = run("bracket", "--order", "3", "q^3", "p^3")
    assert rc == 0 and out.strip()
    rc, out, _ = run("starexp", "--alpha", "1/2", "--gamma", "1/2", "--torder", "4")
    assert rc == 0 and "match" in out.lower()


def test_weight_needs_seed_and_is_deterministic(tmp_path):
    rc, out, _ = run("--format", "json", "kgraphs", "enumerate", "--n", "1")
    graphs = json.loads(out)["graphs"]
    g = tmp_path / "g.json"
    g.write_text(io.dumps(io.document("graph", **graphs[0])))
    assert run("kgraphs", "weight", "--graph", str(g), "--samples", "4000")[0] == 2
    a = run("--format", "json", "kgraphs", "weight", "--graph", str(g), "--samples", "4000", "--seed", "42")
    b = run("--format", "json", "kgraphs", "weight", "--graph", str(g), "--samples", "4000", "--seed", "42")
    assert a[0] == 0 and a[1] == b[1]
    doc = json.loads(a[1])
    assert {"mean", "std_error", "samples", "seed"} <= set(doc)
    graph, est = io.weight_from_doc(doc)
    assert est.samples == 4000 and est.seed == 42


def test_star2_emits_associative_product(tmp_path):
    path = tmp_path / "k2.json"
    assert run("kgraphs", "star2", "--emit", str(path))[0] == 0
    rc, _, _ = run("assoc", "--star", str(path))
    assert rc == 0


def test_jacobi_failure_is_validation_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"names": ["x1", "x2", "x3"], "matrix": [["0", "1", "0"], ["-1", "0", "x2"], ["0", "-x2", "0"]]}))
    assert run("check", "jacobi", "--poisson", str(bad))[0] == 3
    assert run("kgraphs", "star2", "--poisson", str(bad))[0] == 3
    assert run("check", "jacobi")[0] == 0


@pytest.mark.parametrize("what", ["cocycle", "closed"])
def test_checks_pass_on_moyal(what):
    assert run("check", what, "--order", "3")[0] == 0


def test_fedosov_build_pipeline(tmp_path):
    om = tmp_path / "omega.json"
    om.write_text(json.dumps({"names": ["q", "p"], "omega": [["0", "1"], ["-1", "0"]]}))
    conn = tmp_path / "conn.json"
    conn.write_text(json.dumps({"names": ["q", "p"], "symbols": [{"k": 1, "i": 0, "j": 0, "value": "p"}]}))
    star = tmp_path / "star.json"
    assert run("fedosov", "build", "--omega", str(om), "--connection", str(conn), "--dmax", "8", "--emit", str(star))[0] == 0
    S = io.star_product_from_doc(io.read_file(str(star)))
    assert S.order == 4
    assert run("assoc", "--star", str(star))[0] == 0
    # a torsionful connection is rejected as invalid input
    conn.write_text(json.dumps({"names": ["q", "p"], "symbols": [{"k": 0, "i": 0, "j": 1, "value": "p"}]}))
    assert run("fedosov", "build", "--omega", str(om), "--connection", str(conn))[0] == 3
    assert run("fedosov", "build", "--omega", str(om), "--dmax", "2")[0] == 4
    assert run("fedosov", "build", "--omega", str(om), "--dmax", "4", "--order", "3")[0] == 4


def test_missing_file_is_input_error():
    assert run("assoc", "--star", "/nonexistent/star.json")[0] == 2
