import json

import pytest

from haartraces.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize("group, mono, expected", [
    ("u", "p2", "-2*n*p[2] - 2*p[1,1]"),
    ("so", "p1", "-(1/2)*(n-1)*p[1]"),
])
def test_laplacian(capsys, group, mono, expected):
    code, out, _ = run(capsys, "laplacian", "--group", group, "--monomial", mono)
    assert code == 0 and out.strip() == expected


def test_laplacian_degree_error(capsys):
    code, _, err = run(capsys, "laplacian", "--group", "u", "--monomial", "p1*p1*p1")
    assert code != 0 and "degree" in err


@pytest.mark.parametrize("group, poly, expected", [
    ("u", "p2*~p2", "2 (valid for n >= 2)"),
    ("sp", "p2", "-1 (valid for n >= 1)"),
])
def test_expect(capsys, group, poly, expected):
    code, out, _ = run(capsys, "expect", "--group", group, "--poly", poly)
    assert code == 0 and out.strip() == expected


def test_expect_force(capsys):
    code, _, err = run(capsys, "expect", "--group", "so", "--poly", "p2", "--n", "2")
    assert code == 2 and "--force" in err
    code, out, err = run(capsys, "expect", "--group", "so", "--poly", "p2", "--n", "2", "--force")
    assert code == 0
    assert "value=1" in out and "exact=false" in out and "warning" in err


def test_bound(capsys):
    code, out, _ = run(capsys, "bound", "--group", "u", "--d", "1", "--r", "1", "--n", "10")
    assert code == 0
    assert json.loads(out)["bound"] == pytest.approx(0.112838, abs=1e-6)


def test_sample(capsys, tmp_path):
    path = tmp_path / "s.csv"
    code, out, _ = run(capsys, "sample", "--group", "so", "--n", "9", "--count", "3", "--seed", "1",
                       "--output", str(path))
    assert code == 0 and "diagnostics=pass" in out
    rows = path.read_text().splitlines()
    assert rows[0] == "re_p1,im_p1,re_p2,im_p2,re_p3,im_p3,diagnostics"
    assert len(rows) == 4 and all(r.endswith("pass") for r in rows[1:])


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as info:
        main(["sample", "--group", "so", "--n", "9", "--count", "3"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["bound", "--group", "u", "--d", "1", "--r", "1", "--n", "10", "--unknown"])
    assert info.value.code == 2


def test_study_exit_codes(capsys, tmp_path):
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"study": "bounds", "group": "u", "d": [1, 2], "r": "full", "n": [50]}))
    code, out, _ = run(capsys, "study", "--config", str(good))
    assert code == 0 and "passed=true" in out.splitlines()[-1]

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"study": "moments", "group": "u", "n": [4], "samples": "many"}))
    code, _, err = run(capsys, "study", "--config", str(bad), "--seed", "1")
    assert code == 2 and "samples" in err

    noseed = tmp_path / "noseed.json"
    noseed.write_text(json.dumps({"study": "moments", "group": "u", "n": [4], "samples": 10,
                                  "max_weight": 1}))
    code, _, err = run(capsys, "study", "--config", str(noseed))
    assert code == 2 and "seed" in err

    # a gate that must fail: decay of a single-point-per-n study with a positive slope cap
    failing = tmp_path / "fail.json"
    failing.write_text(json.dumps({"study": "clt", "group": "u", "d": 1, "r": 1, "n": [4, 8],
                                   "samples": 20, "replicates": 2, "slope_max": -100}))
    code, out, _ = run(capsys, "study", "--config", str(failing), "--seed", "3")
    assert code == 3 and "passed=false" in out


def test_study_deterministic_csv(capsys, tmp_path):
    conf = tmp_path / "clt.json"
    conf.write_text(json.dumps({"study": "clt", "group": "u", "d": 2, "r": 1, "n": [8, 16],
                                "samples": 40}))
    paths = []
    for name in ("a.csv", "b.csv"):
        paths.append(tmp_path / name)
        code, _, _ = run(capsys, "study", "--config", str(conf), "--seed", "7",
                         "--output-csv", str(paths[-1]))
        assert code in (0, 3)
    assert paths[0].read_bytes() == paths[1].read_bytes()
