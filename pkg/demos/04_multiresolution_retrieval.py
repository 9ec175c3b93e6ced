"""
Multi-resolution retrieval from the command line
================================================

The full pipeline through the ``darac`` command: synthesize data, train,
extract descriptors at three input sizes, whiten each, fuse them and
evaluate. Everything is written under a temporary directory.
"""

import shutil
import tempfile
from pathlib import Path

from darac.cli import main


def run(*argv):
    print("$ darac", " ".join(str(a) for a in argv))
    code = main([str(a) for a in argv])
    if code:
        raise SystemExit(code)


root = Path(tempfile.mkdtemp(prefix="darac-demo-"))
data = root / "data"

# train/, test/ (with gt.tsv) and whiten/, a set of unseen classes used
# only to fit the whitening
run("synth", "--out", data, "--seed", 0)

cfg = root / "desk_train.cfg"
shutil.copy(Path(__file__).with_name("desk_train.cfg"), cfg)
run("train", "--config", cfg, "--log", root / "loss.txt")

ckpt = data / "head.ckpt"
whitened = []
for size in (36, 48, 72):
    fit, test = root / f"fit_{size}.bin", root / f"test_{size}.bin"
    model, white = root / f"white_{size}.model", root / f"test_{size}_w.bin"
    run("extract", "--input", data / "whiten", "--darac", "--checkpoint", ckpt, "--out", fit, "--size", size)
    run("extract", "--input", data / "test", "--darac", "--checkpoint", ckpt, "--out", test, "--size", size)
    run("whiten", "--fit", fit, "--out-model", model)
    run("whiten", "--model", model, "--in", test, "--out", white)
    run("eval", "--descriptors", test, "--gt", data / "test" / "gt.tsv")
    run("eval", "--descriptors", white, "--gt", data / "test" / "gt.tsv")
    whitened.append(str(white))

run("fuse", "--in", ",".join(whitened), "--out", root / "fused.bin")
run("eval", "--descriptors", root / "fused.bin", "--gt", data / "test" / "gt.tsv")

# The six fixed pooling baselines at the same sizes, for comparison.
run("pool-study", "--dataset", data / "test", "--gt", data / "test" / "gt.tsv", "--sizes", "36,48,72")

shutil.rmtree(root)
