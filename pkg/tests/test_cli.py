import json

import numpy as np
import pytest

from ensroc.bands import read_bands_csv
from ensroc.cli import main
from ensroc.votes import VoteMatrix, load_votes, save_votes


def run(*argv):
    try:
        return main([str(a) for a in argv])
    except SystemExit as exc:
        return exc.code


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("synth", "--n", 300, "--d", 4, "--seed", 1, "--separation", 1.5, "-o", d / "train.csv") == 0
    assert run("synth", "--n", 200, "--d", 4, "--seed", 2, "--separation", 1.5, "-o", d / "test.csv") == 0
    assert run("train", "--data", d / "train.csv", "--trees", 16, "--max-depth", 6, "--seed", 3,
               "-o", d / "forest.json") == 0
    assert run("votes", "--model", d / "forest.json", "--data", d / "test.csv", "--seed", 3,
               "-o", d / "votes.csv") == 0
    return d


def test_synth_outputs(workdir):
    lines = (workdir / "train.csv").read_text().splitlines()
    assert lines[0] == "label,x0,x1,x2,x3" and len(lines) == 301
    manifest = json.loads((workdir / "train.csv.manifest.json").read_text())
    assert manifest["subcommand"] == "synth" and manifest["config"]["seed"] == 1


def test_full_and_compact_votes(workdir, tmp_path):
    full = load_votes(workdir / "votes.csv")
    assert full.m_observed == 16 and full.full_votes is not None
    assert run("votes", "--model", workdir / "forest.json", "--data", workdir / "test.csv", "--seed", 3,
               "--compact", "-o", tmp_path / "c.csv") == 0
    text = (tmp_path / "c.csv").read_text().splitlines()
    assert text[0] == "# m=16" and text[1] == "label,count"
    np.testing.assert_array_equal(load_votes(tmp_path / "c.csv").counts, full.counts)


def test_roc_rows_and_m_eval(tmp_path):
    rng = np.random.default_rng(0)
    labels = np.repeat([0, 1], 20)
    save_votes(VoteMatrix(rng.integers(0, 257, 40), 256, labels), tmp_path / "v.csv", compact=True)
    assert run("roc", "--votes", tmp_path / "v.csv", "--m-eval", 512, "-o", tmp_path / "b.csv") == 0
    bands = read_bands_csv(tmp_path / "b.csv")
    assert len(bands["t"]) == 514
    manifest = json.loads((tmp_path / "b.csv.manifest.json").read_text())
    assert manifest["m_eval"] == 512 and manifest["m_observed"] == 256


def test_roc_modes_differ(workdir, tmp_path):
    for mode in ("classifier", "full"):
        assert run("roc", "--votes", workdir / "votes.csv", "--mode", mode, "-o", tmp_path / f"{mode}.csv") == 0
    c, f = read_bands_csv(tmp_path / "classifier.csv"), read_bands_csv(tmp_path / "full.csv")
    np.testing.assert_array_equal(c["mean_tpr"], f["mean_tpr"])
    assert np.all(f["tpr_hi"] >= c["tpr_hi"]) and np.any(f["tpr_hi"] > c["tpr_hi"])


def test_compare_self_has_zero_delta(workdir, tmp_path):
    v = workdir / "votes.csv"
    assert run("compare", "--a", v, "--b", v, "-o", tmp_path / "o.csv") == 0
    rows = (tmp_path / "o.csv").read_text().splitlines()
    header = rows[0].split(",")
    col = header.index("delta_tpr")
    assert all(float(r.split(",")[col]) == 0.0 for r in rows[1:])


def test_oracle_passes(workdir, tmp_path, capsys):
    code = run("oracle", "--votes", workdir / "votes.csv", "--replicates", 4000, "--seed", 5,
               "-o", tmp_path / "o.csv")
    out = capsys.readouterr().out
    assert code == 0
    assert "mean checks" in out and "PASS" in out
    assert (tmp_path / "o.json").exists()


def test_oracle_shared_mode(workdir, tmp_path):
    assert run("oracle", "--votes", workdir / "votes.csv", "--replicates", 50, "--seed", 5,
               "--classifier-mode", "shared-column-bootstrap", "--min-pass", 0.01, "--var-min-pass", 0.01,
               "-o", tmp_path / "o.csv") == 0


def test_max_features_sqrt_in_manifest(tmp_path):
    assert run("synth", "--n", 40, "--d", 4096, "--seed", 0, "-o", tmp_path / "wide.csv") == 0
    assert run("train", "--data", tmp_path / "wide.csv", "--trees", 2, "--max-depth", 2,
               "--max-features", "sqrt", "--seed", 0, "-o", tmp_path / "f.json") == 0
    manifest = json.loads((tmp_path / "f.json.manifest.json").read_text())
    assert manifest["resolved_max_features"] == 64


def test_pipeline(workdir, tmp_path):
    out = tmp_path / "run"
    assert run("pipeline", "--train", workdir / "train.csv", "--test", workdir / "test.csv", "--trees", 8,
               "--seed", 4, "--out-dir", out) == 0
    for name in ("forest.json", "votes.csv", "bands.csv", "pipeline.manifest.json"):
        assert (out / name).exists()


@pytest.mark.parametrize(
    "argv",
    [
        ("train", "--trees", 0, "--seed", 1),
        ("train", "--trees", 4),
        ("roc", "--confidence", 1.5),
        ("roc", "--mode", "other"),
        ("synth", "--n", 10, "--d", 2, "--seed", -1),
        ("oracle", "--replicates", "many"),
    ],
)
def test_usage_errors_exit_2(workdir, tmp_path, argv):
    paths = {"train": ("--data", workdir / "train.csv", "-o", tmp_path / "f.json"),
             "roc": ("--votes", workdir / "votes.csv", "-o", tmp_path / "b.csv"),
             "synth": ("-o", tmp_path / "s.csv"),
             "oracle": ("--votes", workdir / "votes.csv", "--seed", 1, "-o", tmp_path / "o.csv")}
    assert run(*argv, *paths[argv[0]]) == 2


def test_missing_seed_names_flag(workdir, tmp_path, capsys):
    code = run("train", "--data", workdir / "train.csv", "--trees", 4, "-o", tmp_path / "f.json")
    assert code == 2
    assert "--seed" in capsys.readouterr().err


def test_max_features_too_large(workdir, tmp_path):
    assert run("train", "--data", workdir / "train.csv", "--trees", 2, "--seed", 1, "--max-features", 9,
               "-o", tmp_path / "f.json") == 2


def test_runtime_errors_exit_1(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("label,count\n0,3\n")  # compact form without the m line
    assert run("roc", "--votes", bad, "-o", tmp_path / "b.csv") == 1
    assert run("roc", "--votes", tmp_path / "missing.csv", "-o", tmp_path / "b.csv") == 1


def test_config_precedence(workdir, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('seed = 9\n[train]\ntrees = 3\nmax-depth = 2\n')
    assert run("train", "--config", cfg, "--data", workdir / "train.csv", "--trees", 5,
               "-o", tmp_path / "f.json") == 0
    conf = json.loads((tmp_path / "f.json.manifest.json").read_text())["config"]
    assert conf["trees"] == 5 and conf["max_depth"] == 2 and conf["seed"] == 9


def test_config_errors(workdir, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[train]\nbogus = 1\n")
    base = ("train", "--config", cfg, "--data", workdir / "train.csv", "--trees", 2, "--seed", 1,
            "-o", tmp_path / "f.json")
    assert run(*base) == 2
    cfg.write_text("[train]\nmin-leaf = 0\n")
    assert run(*base) == 2
