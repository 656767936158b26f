import csv
import io

import pytest

from replicaload import allocation as al
from replicaload.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_design_block(capsys, tmp_path):
    path = tmp_path / "a.txt"
    code, out, _ = run(capsys, "design", "--kind", "block", "--d", "3", "--alloc-out", str(path))
    assert code == 0
    (r,) = rows(out)
    assert r["n"] == "7" and r["overlap_frac_1"] == "1.0" and r["balanced"] == "true"
    assert al.StorageAllocation.load(path).n_nodes == 7


def test_design_errors(capsys):
    code, _, err = run(capsys, "design", "--kind", "clustering", "--n", "10", "--d", "3")
    assert code == 2 and "ParameterMismatch" in err
    assert run(capsys, "design", "--kind", "nonsense", "--n", "10", "--d", "3")[0] == 2


def test_design_seed_summary(capsys):
    code, out, _ = run(capsys, "design", "--kind", "random-block-approx", "--n", "40", "--d", "4", "--seeds", "3")
    r = rows(out)
    assert code == 0 and [x["seed"] for x in r] == ["0", "1", "2", "mean", "stdev"]


def test_feasible_exit_codes(capsys, tmp_path):
    alloc = tmp_path / "a.txt"
    al.build("cyclic", 4, 2).save(alloc)
    rho = tmp_path / "rho.txt"
    rho.write_text("1\n1\n1\n1\n")
    code, out, _ = run(capsys, "feasible", "--alloc", str(alloc), "--rho", str(rho), "--m", "1")
    assert (code, out) == (0, "feasible\n")
    rho.write_text("2\n2\n0\n0\n")
    for method in ("flow", "subsets"):
        code, out, _ = run(capsys, "feasible", "--alloc", str(alloc), "--rho", str(rho), "--m", "1", "--method", method)
        assert (code, out) == (1, "infeasible I={0,1}\n")
    rho.write_text("1\n1\n")
    assert run(capsys, "feasible", "--alloc", str(alloc), "--rho", str(rho), "--m", "1")[0] == 2


SIM = ["simulate", "--designs", "cyclic,random,block", "--n", "12,21", "--d", "3", "--model", "bern:lambda=2,p=0.3",
       "--sweep", "p=0.2,0.4", "--trials", "3000", "--seed", "5"]


def test_simulate_rows(capsys):
    code, out, _ = run(capsys, *SIM)
    assert code == 0
    r = rows(out)
    assert list(r[0]) == ["design", "n", "d", "m", "model", "param", "trials", "p_hat", "ci_low", "ci_high", "seed"]
    keys = [(x["design"], int(x["n"]), int(x["d"]), float(x["m"]), x["param"]) for x in r]
    assert keys == sorted(keys)
    skipped = [x for x in r if x["p_hat"] == "skipped"]
    assert [(x["design"], x["n"]) for x in skipped] == [("block", "12")] * 2
    for x in r:
        if x["p_hat"] != "skipped":
            assert repr(float(x["p_hat"])) == x["p_hat"]


def test_simulate_deterministic_across_workers(capsys, tmp_path):
    outs = []
    for w in ("1", "2", "1"):
        path = tmp_path / f"o{len(outs)}.csv"
        assert main(SIM + ["--workers", w, "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_bounds_deterministic_and_mc_columns(capsys, tmp_path):
    argv = ["bounds", "--designs", "cyclic,clustering", "--n", "12", "--d", "3", "--model", "exp:mu=2",
            "--trials", "2000", "--with-mc", "--seed", "3"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(argv + ["--out", str(a)]) == 0
    assert main(argv + ["--out", str(b), "--workers", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    r = rows(a.read_text())
    assert {"mc_p_hat", "mc_ci_low", "mc_ci_high"} <= set(r[0])
    assert {x["bound"] for x in r} >= {"cyclic_lb", "cyclic_ub", "clustering_chernoff_lb", "span_ub"}


def test_usage_errors(capsys):
    assert run(capsys, "bounds", "--bounds", "nope", "--model", "exp:mu=1")[0] == 2
    assert run(capsys, "simulate", "--n", "", "--model", "exp:mu=1")[0] == 2
    assert run(capsys, "simulate", "--model", "exp:mu=1", "--trials", "0")[0] == 2
    assert run(capsys, "simulate")[0] == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_config_precedence(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sweep\ndesigns = cyclic\nn = 12\nd = 3\nmodel = exp:mu=2   # rate\ntrials = 1000\nseed = 9\n")
    code, out, _ = run(capsys, "simulate", "--config", str(cfg))
    (r,) = rows(out)
    assert code == 0 and (r["trials"], r["seed"]) == ("1000", "9")
    code, out, _ = run(capsys, "simulate", "--config", str(cfg), "--seed", "4", "--n", "15")
    (r,) = rows(out)
    assert (r["seed"], r["n"]) == ("4", "15")
    cfg.write_text("bogus = 1\n")
    assert run(capsys, "simulate", "--config", str(cfg))[0] == 2
    cfg.write_text("no equals sign\n")
    assert run(capsys, "simulate", "--config", str(cfg))[0] == 2


def test_scan(capsys):
    code, out, _ = run(capsys, "scan", "--model", "bern:lambda=1,p=0.1", "--n", "100", "--s", "3", "--x", "1.5",
                       "--method", "poisson")
    (r,) = rows(out)
    assert code == 0 and abs(float(r["p"]) - 0.0643) < 5e-4
    code, out, _ = run(capsys, "scan", "--model", "exp:mu=1", "--n", "50", "--s", "60", "--x", "3")
    assert code == 2
