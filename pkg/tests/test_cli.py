import json
import shutil

import pytest

from conftest import NOISY, corpus_spec
from structura.cli import main


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli")
    spec = out / "spec.json"
    spec.write_text(json.dumps(corpus_spec(NOISY, seed=5, pieces=["aaba", "minuet"], per_variant=2)))
    assert main(["synth", "--spec", str(spec), "--out", str(out / "corpus")]) == 0
    return out / "corpus"


def read_tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_cluster_writes_outputs(corpus_dir, tmp_path):
    out = tmp_path / "run"
    assert main(["cluster", "--manifest", str(corpus_dir / "manifest.json"), "--out", str(out)]) == 0
    for piece in ("aaba", "minuet"):
        for name in ("matrices.json", "cost.csv", "warp_opt.csv", "warp_mean.csv", "len.csv",
                     "combined.csv", "dendrogram.json", "dendrogram.nwk", "assignment.csv"):
            assert (out / piece / name).is_file()
    assert json.loads((out / "config.json").read_text())["method"] == "average"


def test_cluster_rerun_byte_identical(corpus_dir, tmp_path):
    args = ["cluster", "--manifest", str(corpus_dir / "manifest.json")]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b"), "--threads", "4"]) == 0
    assert read_tree(tmp_path / "a") == read_tree(tmp_path / "b")


def test_cluster_then_evaluate(corpus_dir, tmp_path, capsys):
    manifest = str(corpus_dir / "manifest.json")
    assert main(["cluster", "--manifest", manifest, "--out", str(tmp_path / "run")]) == 0
    capsys.readouterr()
    assert main(["evaluate", "--manifest", manifest, "--assignments", str(tmp_path / "run"),
                 "--out", str(tmp_path / "scores.json")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report == json.loads((tmp_path / "scores.json").read_text())
    assert {r["piece_id"] for r in report["per_piece"]} == {"aaba", "minuet"}
    assert 0 <= report["mean"]["v"] <= 1


def _write_assignment(root, piece, labels):
    (root / piece).mkdir(parents=True, exist_ok=True)
    rows = "".join(f"{k},{v}\n" for k, v in labels.items())
    (root / piece / "assignment.csv").write_text("transcription_id,cluster_label\n" + rows)


def _manifest(tmp_path, rows):
    path = tmp_path / "m.json"
    path.write_text(json.dumps([{"piece_id": "p", "transcription_id": t, "path": f"{t}.mid",
                                 "group_label": g} for t, g in rows]))
    return path


@pytest.mark.parametrize("pred, expected", [
    ({"a": 0, "b": 0, "c": 1, "d": 1}, (1.0, 1.0, 1.0)),
    ({"a": 0, "b": 1, "c": 2, "d": 3}, (1.0, None, None)),
    ({"a": 0, "b": 0, "c": 1, "d": 2}, (1.0, 2 / 3, 0.8)),
])
def test_evaluate_examples(tmp_path, capsys, pred, expected):
    m = _manifest(tmp_path, [("a", "X"), ("b", "X"), ("c", "Y"), ("d", "Y")])
    _write_assignment(tmp_path / "run", "p", pred)
    assert main(["evaluate", "--manifest", str(m), "--assignments", str(tmp_path / "run")]) == 0
    mean = json.loads(capsys.readouterr().out)["mean"]
    for key, want in zip("hcv", expected):
        if want is not None:
            assert mean[key] == pytest.approx(want, abs=1e-12)


def test_evaluate_label_mismatch(tmp_path):
    m = _manifest(tmp_path, [("a", "X"), ("b", "Y")])
    _write_assignment(tmp_path / "run", "p", {"a": 0, "zz": 1})
    assert main(["evaluate", "--manifest", str(m), "--assignments", str(tmp_path / "run")]) == 1


def test_usage_errors_exit_1(tmp_path, capsys):
    assert main(["cluster", "--manifest", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["cluster", "--bogus"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["cluster", "--manifest", "m", "--out", "o", "--weights", "1,2"])
    assert exc.value.code == 1


def test_partial_failure_exit_2(corpus_dir, tmp_path):
    copy = tmp_path / "corpus"
    shutil.copytree(corpus_dir, copy)
    (copy / "aaba" / "aaba-p00.mid").write_bytes(b"not a midi file")
    out = tmp_path / "run"
    assert main(["cluster", "--manifest", str(copy / "manifest.json"), "--out", str(out)]) == 2
    assert (out / "minuet" / "assignment.csv").is_file()
    assert not (out / "aaba").exists()


def test_single_transcription_piece_skipped(corpus_dir, tmp_path):
    rows = json.loads((corpus_dir / "manifest.json").read_text())
    rows = [r for r in rows if r["piece_id"] == "minuet" or r["transcription_id"] == "aaba-p00"]
    for r in rows:
        r["path"] = str(corpus_dir / r["path"])
    m = tmp_path / "m.json"
    m.write_text(json.dumps(rows))
    out = tmp_path / "run"
    assert main(["cluster", "--manifest", str(m), "--out", str(out)]) == 0
    assert not (out / "aaba").exists() and (out / "minuet" / "assignment.csv").is_file()


def test_config_file_and_overrides(corpus_dir, tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('[align]\nalpha = 0.75\n[cluster]\nmethod = "single"\nthreshold = 0.2\n')
    out = tmp_path / "run"
    assert main(["cluster", "--manifest", str(corpus_dir / "manifest.json"), "--out", str(out),
                 "--config", str(cfg), "--threshold", "0.4"]) == 0
    saved = json.loads((out / "config.json").read_text())
    assert (saved["alpha"], saved["method"], saved["threshold"]) == (0.75, "single", 0.4)


def test_tune(corpus_dir, tmp_path, capsys):
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"weights": [[1, 0, 0, 0], [0.75, 0, 0, 0.25]], "methods": ["average"],
                                "thresholds": [0.1, 0.3], "alphas": [0.5]}))
    out = tmp_path / "tune"
    assert main(["tune", "--manifest", str(corpus_dir / "manifest.json"), "--grid", str(grid),
                 "--out", str(out)]) == 0
    best = json.loads((out / "best.json").read_text())
    assert best == json.loads(capsys.readouterr().out)
    assert set(best["params"]) == {"weights", "method", "threshold", "alpha"}
    assert len((out / "leaderboard.csv").read_text().splitlines()) == 5
    assert len(json.loads((out / "leaderboard.json").read_text())) == 4


def test_align_dump(corpus_dir, tmp_path):
    out = tmp_path / "pair.json"
    assert main(["align", "--manifest", str(corpus_dir / "manifest.json"), "--piece", "aaba",
                 "--pair", "aaba-p00", "aaba-p01", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert (d["i_id"], d["j_id"]) == ("aaba-p00", "aaba-p01")
    assert d["path"][0] == [0, 0] and d["path"][-1] == [d["I"] - 1, d["J"] - 1]
    assert main(["align", "--manifest", str(corpus_dir / "manifest.json"), "--piece", "aaba",
                 "--pair", "aaba-p00", "minuet-p00", "--out", str(out)]) == 1
