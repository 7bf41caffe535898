import json
import subprocess
import sys
import time

import pytest

from conftest import CORPUS
from dgat.cli import main
from dgat.cli.config import ConfigError, load_run_config
from dgat.model import DGAT, HeadInfo, ModelConfig
from dgat.molgraph import Block, FeatureScheme

DESK = {"d_model": 32, "n_layers": 3, "n_heads": 4, "dropout": 0.1}


def write_config(path, seed=0, train=None, **paths):
    cfg = {"model": DESK, "train": train or {"lr": 1e-3, "epochs": 2, "batch_size": 4}, "paths": paths}
    if seed is not None:
        cfg["seed"] = seed
    path.write_text(json.dumps(cfg))
    return str(path)


def other_scheme():
    base = FeatureScheme.default()
    element = Block("element", base.atom_blocks[0].vocab[:-1], True)
    return FeatureScheme((element,) + base.atom_blocks[1:], base.bond_blocks)


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("D_GAT_SEED", raising=False)
    return tmp_path


def pretrain_config(workdir, name="pre", seed=0, **extra):
    return write_config(workdir / f"{name}.json", seed=seed, corpus=str(CORPUS / "pretrain_toy.csv"),
                        checkpoint_out=f"{name}.ckpt", log=f"{name}.jsonl", **extra)


# featurize ----------------------------------------------------------------------

def test_featurize_writes_one_record_per_molecule(workdir, capsys):
    (workdir / "in.csv").write_text("smiles\nCCO\nc1ccccc1\nCC(=O)O\n")
    assert main(["featurize", "in.csv", "--out", "out.jsonl"]) == 0
    recs = [json.loads(x) for x in (workdir / "out.jsonl").read_text().splitlines()]
    assert [r["smiles"] for r in recs] == ["CCO", "c1ccccc1", "CC(=O)O"]
    assert recs[1]["n_directed_edges"] == 12
    assert all(r["scheme_hash"] == FeatureScheme.default().hash for r in recs)
    assert "featurized 3 molecules, 0 failures" in capsys.readouterr().err


def test_featurize_skips_bad_smiles(workdir, capsys):
    (workdir / "in.csv").write_text("smiles\nCCO\nC1CC\nCCN\n")
    assert main(["featurize", "in.csv", "--out", "out.jsonl"]) == 0
    recs = [json.loads(x) for x in (workdir / "out.jsonl").read_text().splitlines()]
    assert [r["row"] for r in recs] == [0, 2]
    assert "1 failures" in capsys.readouterr().err


def test_featurize_unreadable_input(workdir):
    assert main(["featurize", "missing.csv", "--out", "out.jsonl"]) == 2
    assert not (workdir / "out.jsonl").exists()


def test_featurize_with_scheme_file(workdir):
    other_scheme().save(workdir / "s.json")
    (workdir / "in.csv").write_text("smiles\nCCO\n")
    assert main(["featurize", "in.csv", "--scheme", "s.json", "--out", "out.jsonl"]) == 0
    assert json.loads((workdir / "out.jsonl").read_text())["scheme_hash"] == other_scheme().hash


# exit codes and configs ---------------------------------------------------------

def test_usage_errors():
    assert main([]) == 2
    assert main(["bogus"]) == 2


def test_missing_seed_is_an_input_error(workdir):
    cfg = write_config(workdir / "c.json", seed=None, corpus=str(CORPUS / "pretrain_toy.csv"),
                       checkpoint_out="x.ckpt")
    assert main(["pretrain", cfg]) == 2
    assert not (workdir / "x.ckpt").exists()


def test_seed_env_and_flag_precedence(workdir, monkeypatch):
    cfg = write_config(workdir / "c.json", seed=1)
    assert load_run_config(cfg).seed == 1
    monkeypatch.setenv("D_GAT_SEED", "5")
    assert load_run_config(cfg).seed == 5
    assert load_run_config(cfg, {"seed": 9}).seed == 9
    assert load_run_config(cfg).train.seed == 5
    monkeypatch.setenv("D_GAT_SEED", "five")
    with pytest.raises(ConfigError):
        load_run_config(cfg)


def test_config_rejects_unknown_keys(workdir):
    p = workdir / "c.json"
    for bad in ({"seed": 0, "extra": 1}, {"seed": 0, "train": {"seed": 1}}, {"seed": 0, "train": {"lrr": 1}},
                {"seed": 0, "paths": {"output": "x"}}, {"seed": -1}, [1, 2]):
        p.write_text(json.dumps(bad))
        with pytest.raises(ConfigError):
            load_run_config(p)
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_run_config(p)


def test_config_paths_resolve_against_config_dir(workdir):
    sub = workdir / "cfg"
    sub.mkdir()
    cfg = write_config(sub / "c.json", corpus="data.csv")
    run = load_run_config(cfg, {"log": "here.jsonl"})
    assert run.path("corpus") == sub / "data.csv"
    assert str(run.path("log")) == "here.jsonl"


def test_missing_output_directory_fails_before_training(workdir):
    cfg = write_config(workdir / "c.json", corpus=str(CORPUS / "pretrain_toy.csv"),
                       checkpoint_out="nowhere/x.ckpt")
    assert main(["pretrain", cfg]) == 2


def test_divergence_exit_code(workdir, capsys):
    cfg = pretrain_config(workdir, train={"lr": 1e300, "epochs": 3, "batch_size": 8})
    assert main(["pretrain", cfg]) == 4
    assert "pre.ckpt" in capsys.readouterr().err
    DGAT.load(workdir / "pre.ckpt")


def test_scheme_mismatch_exit_code(workdir):
    model = DGAT(ModelConfig.desk(), seed=0)
    model.add_task_head("task", HeadInfo(["aromatic"], ["binary"]), seed=1)
    model.save(workdir / "m.ckpt")
    other_scheme().save(workdir / "s.json")
    data = str(CORPUS / "binary_toy.csv")
    assert main(["evaluate", "m.ckpt", data, "--partition", "all", "--scheme", "s.json"]) == 3
    cfg = write_config(workdir / "f.json", dataset=data, checkpoint_in="m.ckpt", scheme="s.json",
                       checkpoint_out="out.ckpt")
    assert main(["finetune", cfg]) == 3
    assert not (workdir / "out.ckpt").exists()


def test_corrupt_checkpoint_is_an_input_error(workdir):
    (workdir / "bad.ckpt").write_bytes(b"DGATCKP1garbage")
    assert main(["predict", "bad.ckpt", "CCO"]) == 2


# predict / evaluate -------------------------------------------------------------

def test_predict_zero_head_gives_one_half(workdir, capsys):
    model = DGAT(ModelConfig.desk(), seed=0)
    model.add_task_head("task", HeadInfo(["a", "b"], ["binary", "binary"]), seed=1, zero=True)
    model.save(workdir / "m.ckpt")
    assert main(["predict", "m.ckpt", "CCO", "c1ccccc1"]) == 0
    lines = [json.loads(x) for x in capsys.readouterr().out.splitlines()]
    assert [x["smiles"] for x in lines] == ["CCO", "c1ccccc1"]
    assert all(v == 0.5 for x in lines for v in x["outputs"].values())
    assert main(["predict", "m.ckpt", "C1CC"]) == 2
    assert main(["predict", "m.ckpt", "CCO", "--head", "nope"]) == 2


def test_pretrain_then_finetune_then_evaluate(workdir, capsys):
    start = time.perf_counter()
    assert main(["pretrain", pretrain_config(workdir, train={"lr": 1e-3, "epochs": 5, "batch_size": 4})]) == 0
    assert len((workdir / "pre.jsonl").read_text().splitlines()) == 5
    cfg = write_config(workdir / "ft.json", train={"lr": 1e-3, "epochs": 5, "batch_size": 8},
                       dataset=str(CORPUS / "binary_toy.csv"), checkpoint_in="pre.ckpt",
                       checkpoint_out="ft.ckpt", split_out="split.json", metrics="metrics.json", log="ft.jsonl")
    assert main(["finetune", cfg]) == 0
    assert time.perf_counter() - start < 60
    summary = json.loads((workdir / "metrics.json").read_text())
    capsys.readouterr()
    assert main(["evaluate", "ft.ckpt", str(CORPUS / "binary_toy.csv"), "--split", "split.json"]) == 0
    printed = json.loads(capsys.readouterr().out.splitlines()[-1])
    assert printed == summary["metrics"]["test"]
    log = [json.loads(x) for x in (workdir / "ft.jsonl").read_text().splitlines()]
    assert log[0]["epoch"] == 0 and log[-1]["epoch"] == "final"


def test_runs_are_byte_identical(workdir):
    outs = []
    for name in ("a", "b"):
        assert main(["pretrain", pretrain_config(workdir, name=name)]) == 0
        outs.append(((workdir / f"{name}.ckpt").read_bytes(), (workdir / f"{name}.jsonl").read_bytes()))
    assert outs[0] == outs[1]
    assert main(["pretrain", pretrain_config(workdir, name="c", seed=1)]) == 0
    assert (workdir / "c.ckpt").read_bytes() != outs[0][0]


def test_env_seed_matches_file_seed(workdir, monkeypatch):
    assert main(["pretrain", pretrain_config(workdir, name="file", seed=3)]) == 0
    monkeypatch.setenv("D_GAT_SEED", "3")
    assert main(["pretrain", pretrain_config(workdir, name="env", seed=0)]) == 0
    assert (workdir / "file.ckpt").read_bytes() == (workdir / "env.ckpt").read_bytes()


def test_flags_override_config(workdir):
    cfg = pretrain_config(workdir)
    assert main(["pretrain", cfg, "--epochs", "1", "--log", "flag.jsonl", "--checkpoint-out", "flag.ckpt"]) == 0
    assert len((workdir / "flag.jsonl").read_text().splitlines()) == 1
    assert (workdir / "flag.ckpt").exists() and not (workdir / "pre.ckpt").exists()


def test_module_entry_point(workdir):
    proc = subprocess.run([sys.executable, "-m", "dgat", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "featurize" in proc.stdout
