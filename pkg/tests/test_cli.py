import subprocess
import sys

import pytest

from mvet.cli import RunConfig, main, read_config_file
from mvet.dataset import read_dataset
from mvet.errors import ConfigInvalid
from mvet.views import toy_dir

SMALL = ["--entities", "300", "--types", "6", "--max-types", "2"]
FAST = ["--d", "8", "--h", "6", "--epochs", "3", "--patience", "2"]


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    d = tmp_path_factory.mktemp("gen")
    assert run("gen", "--out", d, "--seed", 7, *SMALL) == 0
    return d


def test_gen_is_deterministic(tmp_path, data):
    assert run("gen", "--out", tmp_path, "--seed", 7, *SMALL) == 0
    for name in ("train.mvet", "dev.mvet", "test.mvet", "config.txt"):
        want = (data / name).read_bytes().replace(str(data).encode(), b"")
        got = (tmp_path / name).read_bytes().replace(str(tmp_path).encode(), b"")
        assert got == want, name


def test_gen_default_profile_has_twelve_views(data):
    ds = read_dataset(data / "train.mvet")
    assert len(ds.views) == 12
    assert len({v.language for v in ds.views}) == 4


def test_gen_invalid_probability(tmp_path, capsys):
    assert run("gen", "--out", tmp_path, "--availability", "1,0.5,1.5,0.2") == 2
    assert "availability" in capsys.readouterr().err
    assert run("gen", "--out", tmp_path, "--ambiguity", "2") == 2
    assert "ambiguity" in capsys.readouterr().err


def test_unknown_fusion_is_a_usage_error(data, tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("train", "--data", data, "--out", tmp_path, "--fusion", "sum")
    assert exc.value.code == 2


def test_config_errors(tmp_path, data, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("seed=1\nwidth=3\n")
    assert run("gen", "--config", bad, "--out", tmp_path) == 2
    assert "width" in capsys.readouterr().err
    with pytest.raises(ConfigInvalid):
        read_config_file(bad)
    assert run("train", "--data", data, "--out", tmp_path, "--threshold", "1") == 2
    assert run("train", "--data", data, "--out", tmp_path, "--views", "xx:ctxt") == 2


def test_missing_data_is_a_runtime_error(tmp_path, capsys):
    assert run("train", "--data", tmp_path / "nowhere", "--out", tmp_path) == 3
    assert "not found" in capsys.readouterr().err


@pytest.mark.parametrize("views,fusion,regime", [
    ("en:ctxt", "con", "multiview"),
    ("all", "att", "multiview"),
    ("de:name", "avg", "single"),
    ("all", "avg", "cross"),
])
def test_train_and_eval(data, tmp_path, views, fusion, regime, capsys):
    out = tmp_path / "run"
    assert run("train", "--data", data, "--out", out, "--views", views, "--fusion", fusion,
               "--regime", regime, *FAST) == 0
    assert (out / "model.ckpt").is_file()
    assert (out / "history.csv").read_text().startswith("epoch,loss,dev_f1\n")
    assert run("eval", "--data", data, "--out", out) == 0
    assert run("eval", "--data", data, "--out", out, "--label", "again") == 0
    lines = (out / "ledger.csv").read_text().splitlines()
    assert lines[0] == "label,all,tail,head,p,r,n_tail,n_head"
    assert len(lines) == 3 and lines[1].startswith("run,") and lines[2].startswith("again,")
    assert (out / "config.txt").read_text() != (out / "eval_config.txt").read_text()


def test_eval_perfect_setup(tmp_path, capsys):
    d = tmp_path / "d"
    assert run("gen", "--out", d, "--entities", 500, "--types", 10, "--ambiguity", 0, "--languages", "en,de",
               "--availability", "1,1", "--noise", "0,0") == 0
    out = tmp_path / "run"
    assert run("train", "--data", d, "--out", out, "--fusion", "con", "--lr", 0.003, "--batch", 32,
               "--epochs", 50, "--patience", 50) == 0
    assert run("eval", "--data", d, "--out", out, "--label", "perfect") == 0
    row = (out / "ledger.csv").read_text().splitlines()[1].split(",")
    assert float(row[1]) >= 0.99


def test_eval_spec_mismatch(data, tmp_path, capsys):
    out = tmp_path / "run"
    assert run("train", "--data", data, "--out", out, "--views", "en:ctxt", *FAST) == 0
    other = tmp_path / "other"
    assert run("gen", "--out", other, "--seed", 1, "--ctxt-dim", 5, *SMALL) == 0
    assert run("eval", "--out", out, "--dataset", other / "test.mvet") == 3
    assert "en:ctxt" in capsys.readouterr().err


def test_build_views_on_toy(tmp_path, capsys):
    args = ["--sources", toy_dir(), "--sgns-dim", 8, "--sgns-epochs", 2]
    assert run("build-views", "--out", tmp_path / "a", *args) == 0
    assert run("build-views", "--out", tmp_path / "b", *args) == 0
    a = (tmp_path / "a" / "dataset.mvet").read_bytes()
    assert a == (tmp_path / "b" / "dataset.mvet").read_bytes()
    ds = read_dataset(tmp_path / "a" / "dataset.mvet")
    assert ds.availability_counts() == {"de:ctxt": 7, "en:ctxt": 10, "de:name": 8, "en:name": 10,
                                        "de:desc": 5, "en:desc": 7}


def test_build_views_missing_embeddings(tmp_path, capsys):
    src = tmp_path / "src"
    src.mkdir()
    for name in ("skeleton.tsv", "en.titles.tsv"):
        (src / name).write_bytes((toy_dir() / name).read_bytes())
    assert run("build-views", "--out", tmp_path / "o", "--sources", src, "--views", "en:name") == 3
    assert "en.vec" in capsys.readouterr().err


def test_tables_rerun_identically(data, tmp_path, capsys):
    for cmd in ("table1", "table2"):
        outs = []
        for k in range(2):
            out = tmp_path / f"{cmd}-{k}"
            assert run(cmd, "--data", data, "--out", out, "--replicates", 1, "--epochs", 2, "--d", 6,
                       "--h", 4) == 0
            outs.append(out)
        for suffix in (".txt", ".csv", "_runs.csv"):
            assert (outs[0] / f"{cmd}{suffix}").read_bytes() == (outs[1] / f"{cmd}{suffix}").read_bytes()
    rows = (tmp_path / "table2-0" / "table2.csv").read_text().splitlines()
    assert len(rows) == 1 + 12


def test_config_echo_round_trip(data, tmp_path, capsys):
    first = tmp_path / "first"
    assert run("train", "--data", data, "--out", first, "--fusion", "max", "--seed", 4, *FAST) == 0
    echoed = read_config_file(first / "config.txt")
    assert echoed["fusion"] == "max" and echoed["seed"] == 4
    assert RunConfig(**echoed).echo() == (first / "config.txt").read_text()
    second = tmp_path / "second"
    assert run("train", "--config", first / "config.txt", "--out", second) == 0
    assert (first / "model.ckpt").read_bytes() == (second / "model.ckpt").read_bytes()
    assert (first / "history.csv").read_bytes() == (second / "history.csv").read_bytes()


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "mvet.cli", "gen", "--out", str(tmp_path), "--zipf", "1"],
                          capture_output=True, text=True)
    assert proc.returncode == 2 and "zipf" in proc.stderr
    proc = subprocess.run([sys.executable, "-m", "mvet.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "table2" in proc.stdout
