import subprocess
import sys

import numpy as np
import pytest

from darac import head_init, make_rng
from darac.cli import main
from darac.io import load_descriptors, load_head, save_descriptors, save_head


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_regions_output(capsys):
    code, out, err = run(capsys, "regions", "--width", "16", "--height", "12")
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 21
    assert lines[0] == "0 0 0 16 12"
    assert all(len(l.split()) == 5 for l in lines)
    assert "1:2" in err and "2:6" in err and "3:12" in err


def test_usage_errors(capsys):
    assert run(capsys, )[0] == 1
    assert run(capsys, "nonsense")[0] == 1
    code, _, err = run(capsys, "regions", "--width", "4")
    assert code == 1 and err.count("\n") == 1
    assert run(capsys, "pool-study", "--dataset", "x", "--gt", "y", "--sizes", "a,b")[0] == 1


def test_contract_violation(capsys):
    code, _, err = run(capsys, "regions", "--width", "0", "--height", "4")
    assert code == 2 and err.startswith("error:")


def test_missing_file_is_data_error(tmp_path, capsys):
    code, _, err = run(capsys, "eval", "--descriptors", str(tmp_path / "none.bin"), "--gt", str(tmp_path / "gt"))
    assert code == 2 and err.count("\n") == 1


def test_train_without_paths_is_contract_error(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("steps=1\n")
    assert run(capsys, "train", "--config", str(cfg))[0] == 3


def test_eval_exact_duplicates(tmp_path, capsys):
    rng = np.random.default_rng(0)
    base = rng.normal(size=(4, 6))
    X = np.repeat(base, 2, axis=0)
    names = [f"{c}{i}" for c in "abcd" for i in range(2)]
    save_descriptors(tmp_path / "d.bin", names, X)
    (tmp_path / "gt.tsv").write_text("".join(f"{c}0\t{c}1\t\n" for c in "abcd"))
    code, out, _ = run(capsys, "eval", "--descriptors", str(tmp_path / "d.bin"), "--gt", str(tmp_path / "gt.tsv"))
    assert code == 0 and out.strip() == "mAP 1.0000"


def test_eval_unknown_names(tmp_path, capsys):
    save_descriptors(tmp_path / "d.bin", ["a", "b"], np.eye(2))
    (tmp_path / "gt.tsv").write_text("zz\ta\t\n")
    assert run(capsys, "eval", "--descriptors", str(tmp_path / "d.bin"), "--gt", str(tmp_path / "gt.tsv"))[0] == 2


def test_fuse_identical_files(tmp_path, capsys):
    X = np.random.default_rng(1).normal(size=(5, 3))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    names = list("vwxyz")
    p = tmp_path / "a.bin"
    save_descriptors(p, names, X)
    code, _, _ = run(capsys, "fuse", "--in", f"{p},{p},{p}", "--out", str(tmp_path / "f.bin"))
    assert code == 0
    got_names, Y = load_descriptors(tmp_path / "f.bin")
    assert got_names == names
    assert np.allclose(Y, X.astype(np.float32), atol=1e-7)


def test_fuse_misaligned(tmp_path, capsys):
    save_descriptors(tmp_path / "a.bin", ["a", "b"], np.eye(2))
    save_descriptors(tmp_path / "b.bin", ["b", "a"], np.eye(2))
    code, _, _ = run(capsys, "fuse", "--in", f"{tmp_path / 'a.bin'},{tmp_path / 'b.bin'}", "--out", str(tmp_path / "f"))
    assert code == 2


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--out", str(d), "--classes", "3", "--train-per-class", "4",
                 "--test-per-class", "3", "--width", "24", "--height", "20"]) == 0
    return d


def test_synth_layout(synth_dir):
    assert (synth_dir / "train" / "labels.tsv").is_file()
    gt = (synth_dir / "test" / "gt.tsv").read_text().splitlines()
    assert len(gt) == 9


def test_extract_variant_and_whiten(synth_dir, tmp_path, capsys):
    out = tmp_path / "v.bin"
    code, _, _ = run(capsys, "extract", "--input", str(synth_dir / "test"), "--variant", "max-regional",
                     "--out", str(out), "--channels", "4")
    assert code == 0
    names, X = load_descriptors(out)
    assert X.shape == (9, 4) and np.allclose(np.linalg.norm(X, axis=1), 1, atol=1e-6)
    model = tmp_path / "w.bin"
    assert run(capsys, "whiten", "--fit", str(out), "--out-model", str(model))[0] == 0
    assert run(capsys, "whiten", "--model", str(model), "--in", str(out), "--out", str(tmp_path / "o.bin"))[0] == 0
    assert run(capsys, "whiten")[0] == 1
    code, out_text, _ = run(capsys, "eval", "--descriptors", str(tmp_path / "o.bin"),
                            "--gt", str(synth_dir / "test" / "gt.tsv"))
    assert code == 0 and out_text.startswith("mAP ")


def test_extract_needs_checkpoint(synth_dir, tmp_path, capsys):
    assert run(capsys, "extract", "--input", str(synth_dir / "test"), "--darac", "--out", str(tmp_path / "x"))[0] == 1


def test_train_then_extract_darac(synth_dir, tmp_path, capsys):
    cfg = tmp_path / "t.cfg"
    cfg.write_text(
        f"seed=2\nk=3\nn=2\nsteps=5\nlearning_rate=0.01\nL_head=3\nC=4\n"
        f"dataset_path={synth_dir / 'train'}\ncheckpoint_path=head.ckpt\n"
    )
    code, out, _ = run(capsys, "train", "--config", str(cfg), "--log", str(tmp_path / "loss.txt"))
    assert code == 0 and "last-5 mean loss" in out
    assert len((tmp_path / "loss.txt").read_text().splitlines()) == 5
    params = load_head(tmp_path / "head.ckpt")
    assert params.L_head == 3 and params.channels == 4
    code, _, _ = run(capsys, "extract", "--input", str(synth_dir / "test"), "--darac",
                     "--checkpoint", str(tmp_path / "head.ckpt"), "--out", str(tmp_path / "d.bin"), "--size", "20")
    assert code == 0
    assert load_descriptors(tmp_path / "d.bin")[1].shape == (9, 4)
    # a square 4x4 map has too few areas for the head
    code, _, err = run(capsys, "extract", "--input", str(synth_dir / "test"), "--darac",
                       "--checkpoint", str(tmp_path / "head.ckpt"), "--out", str(tmp_path / "e.bin"), "--size", "16")
    assert code == 2 and "areas" in err


def test_pool_study_table(synth_dir, capsys):
    code, out, _ = run(capsys, "pool-study", "--dataset", str(synth_dir / "test"),
                       "--gt", str(synth_dir / "test" / "gt.tsv"), "--sizes", "12,20", "--channels", "4")
    assert code == 0
    rows = out.strip().splitlines()
    assert len(rows) == 7
    assert rows[1].split()[0] == "avg-global" and len(rows[1].split()) == 3


def test_module_entry_point(tmp_path):
    save_head(tmp_path / "h", head_init(2, 2, make_rng(0)))
    proc = subprocess.run([sys.executable, "-m", "darac", "regions", "--width", "3", "--height", "3"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("0 0 0 3 3")
