import json
from pathlib import Path

import pytest

from smellpeft.cli import ConfigError, main, resolve_config
from smellpeft.metrics import ZERO_DIVISION_NOTE
from smellpeft.synthetic import write_corpus

FIXTURES = Path(__file__).parent / "fixtures"
TINY_TRAIN = ["--d-model", "16", "--n-heads", "2", "--n-layers", "1", "--d-ff", "16", "--vocab-size", "64", "--max-len", "32", "--epochs", "2", "--batch-size", "16"]


def read_lines(path):
    return [json.loads(line) for line in Path(path).read_text().splitlines()]


# ---------------------------------------------------------------- detect


def test_detect_matches_golden(tmp_path):
    out = tmp_path / "det.jsonl"
    assert main(["detect", str(FIXTURES / "corpus20"), "--out", str(out)]) == 0
    assert out.read_text() == (FIXTURES / "corpus20_golden.jsonl").read_text()
    manifest = json.loads(Path(f"{out}.run.json").read_text())
    assert manifest["subcommand"] == "detect" and manifest["seed"] == 0
    assert "out" not in manifest["config"] and list(manifest["input_digests"]) == [str(FIXTURES / "corpus20")]


def test_detect_empty_directory(tmp_path, capsys):
    assert main(["detect", str(tmp_path)]) == 0
    assert capsys.readouterr().out == ""


def test_threshold_changes_only_verdicts(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    main(["detect", str(FIXTURES / "corpus20"), "--out", str(a)])
    main(["detect", str(FIXTURES / "corpus20"), "--out", str(b), "--cm-threshold", "2"])
    ra, rb = read_lines(a), read_lines(b)
    assert [r["method"] for r in ra] == [r["method"] for r in rb]
    strip = lambda r: {k: v for k, v in r.items() if k not in ("cm", "cc")}  # noqa: E731
    assert list(map(strip, ra)) == list(map(strip, rb))
    assert sum(r["cm"] for r in rb) > sum(r["cm"] for r in ra)


def test_detect_partial_errors(tmp_path):
    (tmp_path / "ok.java").write_text("class A { void f() { if (a) {} } }")
    (tmp_path / "bad.java").write_text('class B { void g() { s = "open; } }')
    out = tmp_path / "o.jsonl"
    assert main(["detect", str(tmp_path), "--out", str(out)]) == 2
    assert [r["method"].rsplit("/", 1)[-1] for r in read_lines(out)] == ["f"]


def test_exit_codes(tmp_path):
    assert main(["detect", str(tmp_path / "missing")]) == 1
    assert main(["detect", str(tmp_path), "--cm-threshold", "0"]) == 3
    bad = tmp_path / "c.yaml"
    bad.write_text("detect:\n  no_such_option: 1\n")
    assert main(["detect", str(tmp_path), "--config", str(bad)]) == 3


# ---------------------------------------------------------------- config precedence


def test_flags_beat_file_beat_defaults():
    assert resolve_config("detect", {}, {})["cm_threshold"] == 8
    file_data = {"cm_threshold": 5, "detect": {"cc_threshold": 4}}
    cfg = resolve_config("detect", file_data, {})
    assert (cfg["cm_threshold"], cfg["cc_threshold"]) == (5, 4)
    assert resolve_config("detect", file_data, {"cm_threshold": 9})["cm_threshold"] == 9


def test_config_errors_name_the_field():
    with pytest.raises(ConfigError, match="detect.cm_threshold: expected int"):
        resolve_config("detect", {"detect": {"cm_threshold": "high"}}, {})
    with pytest.raises(ConfigError, match="bogus"):
        resolve_config("detect", {"bogus": 1}, {})
    # options of other subcommands may share a top-level file
    assert resolve_config("detect", {"epochs": 3}, {})["cm_threshold"] == 8


# ---------------------------------------------------------------- build-dataset, train, evaluate


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    write_corpus(root, 90, seed=4, kind="cc", positive_fraction=0.4)
    return root


@pytest.fixture(scope="module")
def dataset(corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("ds") / "data"
    assert main(["build-dataset", str(corpus), "--out", str(out), "--smell", "cc", "--seed", "3"]) == 0
    return out


def test_build_dataset_outputs(dataset):
    assert sorted(p.name for p in dataset.iterdir()) == ["dataset.jsonl", "manifest.json", "run_manifest.json"]
    manifest = json.loads((dataset / "manifest.json").read_text())
    counts = manifest["split_counts"]
    assert counts["train"]["positive"] == counts["train"]["negative"]


def test_build_dataset_is_deterministic(corpus, dataset, tmp_path):
    again = tmp_path / "again"
    assert main(["build-dataset", str(corpus), "--out", str(again), "--smell", "cc", "--seed", "3"]) == 0
    for name in ("dataset.jsonl", "manifest.json"):
        assert (again / name).read_bytes() == (dataset / name).read_bytes()


def test_build_dataset_failure_leaves_nothing(tmp_path):
    src = tmp_path / "src"
    (src / "p").mkdir(parents=True)
    (src / "p" / "A.java").write_text("class A { void f() {} }")
    out = tmp_path / "out"
    assert main(["build-dataset", str(src), "--out", str(out)]) == 1
    assert not out.exists()
    assert [p.name for p in tmp_path.iterdir()] == ["src"]


def test_build_dataset_expectations(corpus, tmp_path):
    good = tmp_path / "good.yaml"
    good.write_text("- {total: 6945, expected: [5557, 694, 694]}\n- {total: 1587, expected: [1269, 159, 159]}\n")
    assert main(["build-dataset", str(corpus), "--out", str(tmp_path / "a"), "--expectations", str(good)]) == 0
    assert main(["build-dataset", str(corpus), "--out", str(tmp_path / "b"), "--expectations", str(good), "--rounding", "largest-remainder"]) == 3
    assert not (tmp_path / "b").exists()


def test_build_dataset_repo_filter(corpus, tmp_path):
    repos = tmp_path / "repos.jsonl"
    rows = [
        {"full_name": "acme/project0", "created_at": "2022-01-01", "fork": False, "stars": 2000, "loc": 5000},
        {"full_name": "acme/project1", "created_at": "2022-01-01", "fork": True, "stars": 2000, "loc": 5000},
    ]
    repos.write_text("".join(json.dumps(r) + "\n" for r in rows))
    out = tmp_path / "d"
    code = main(["build-dataset", str(corpus), "--out", str(out), "--repos", str(repos), "--smell", "cc"])
    assert code == 0
    projects = {r["project"] for r in read_lines(out / "dataset.jsonl")}
    assert projects == {"project0"}


def test_train_evaluate_and_rerun(dataset, tmp_path):
    out = tmp_path / "model"
    assert main(["train", "--data", str(dataset), "--out", str(out), "--peft", "lora", "--rank", "4", *TINY_TRAIN]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["adapter.bin", "checkpoint.bin", "epochs.jsonl", "run_manifest.json", "summary.json", "vocab.json"]
    assert len(read_lines(out / "epochs.jsonl")) == 2
    summary = json.loads((out / "summary.json").read_text())
    assert 0 < summary["trainable_params"] < summary["total_params"]

    again = tmp_path / "again"
    assert main(["train", "--from-manifest", str(out / "run_manifest.json"), "--out", str(again)]) == 0
    for name in names:
        assert (again / name).read_bytes() == (out / name).read_bytes(), name

    csv_out = tmp_path / "metrics.csv"
    assert main(["evaluate", "--model", str(out), "--data", str(dataset), "--out", str(csv_out)]) == 0
    header, row = csv_out.read_text().splitlines()
    rec = dict(zip(header.split(","), row.split(",")))
    assert rec["method"] == "lora" and rec["smell"] == "cc" and rec["status"] == "ok"
    assert -1.0 <= float(rec["mcc"]) <= 1.0


def test_manifest_for_other_subcommand_is_config_error(dataset, tmp_path):
    code = main(["train", "--from-manifest", str(dataset / "run_manifest.json"), "--out", str(tmp_path / "x")])
    assert code == 3


def test_train_missing_data_is_io_error(tmp_path):
    assert main(["train", "--data", str(tmp_path / "nope"), "--out", str(tmp_path / "m")]) == 1


# ---------------------------------------------------------------- sweep and gradcheck


def test_sweep_rank_grid(tmp_path):
    out = tmp_path / "sweep"
    args = ["sweep", "--synthetic", "60", "--grid", "rq2", "--ranks", "2", "4", "--seeds", "0", "--out", str(out), *TINY_TRAIN]
    assert main(args) == 0
    lines = (out / "report.csv").read_text().splitlines()
    assert len(lines) == 3 and lines[1].split(",")[1] == "lora-r2"
    assert ZERO_DIVISION_NOTE in (out / "report.txt").read_text()


def test_gradcheck_passes_and_fails(tmp_path, capsys):
    assert main(["gradcheck", "--methods", "lora", "ia3", "--n-coords", "6"]) == 0
    assert capsys.readouterr().out.strip().endswith("PASS")
    assert main(["gradcheck", "--methods", "lora", "--n-coords", "6", "--tolerance", "1e-30"]) == 2
    assert main(["gradcheck", "--methods", "adapterfusion"]) == 3
