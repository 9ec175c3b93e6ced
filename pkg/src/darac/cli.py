"""Command-line front end.

Exit status: 0 success, 1 usage error, 2 data or format error, 3 contract
violation. Failures print one diagnostic line on stderr.
"""

from __future__ import annotations

import argparse
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from . import io
from .errors import ContractError, DaracError
from .head import embed
from .pooling import PoolingVariant, baseline_descriptor
from .postprocess import apply_whitening_rows, fit_whitening, fuse_multiresolution, l2_normalize_rows
from .regions import format_grid, rmac_regions, with_global
from .retrieval import RetrievalIndex, class_protocol, evaluate_map, missing_names
from .synthetic import SyntheticSpec, make_split
from .training import ToyExtractor, darac_pooled, resize_short_side, toy_extract, train


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return vals


def _feature_maps(dataset, extractor: ToyExtractor, size: int | None):
    for it in dataset.items:
        img = it.data if size is None else resize_short_side(it.data, size)
        yield toy_extract(img, extractor)


# -- subcommands --------------------------------------------------------------


def cmd_regions(args) -> None:
    regions = rmac_regions(args.width, args.height, num_scales=args.scales)
    grid = with_global(regions, args.width, args.height)
    print(format_grid(grid))
    counts = Counter(r.scale_index for r in grid)
    print("regions per scale: " + " ".join(f"{s}:{counts[s]}" for s in sorted(counts)), file=sys.stderr)


def cmd_synth(args) -> None:
    out = Path(args.out)
    base = SyntheticSpec(num_classes=args.classes, width=args.width, height=args.height)
    tr = SyntheticSpec(**{**base.__dict__, "per_class": args.train_per_class})
    te = SyntheticSpec(**{**base.__dict__, "per_class": args.test_per_class})
    images, names, labels = make_split(tr, args.seed)
    io.write_dataset(out / "train", names, labels, images)
    images, names, labels = make_split(te, args.seed, sample_seed=args.seed + 1000)
    io.write_dataset(out / "test", names, labels, images)
    (out / "test" / "gt.tsv").write_text(io.format_ground_truth(class_protocol(names, labels)), encoding="utf-8")
    written = [out / "train", out / "test"]
    if args.whiten_classes:
        # unseen classes, so the whitening fit does not flatten the
        # directions that separate the evaluation classes
        wh = SyntheticSpec(**{**base.__dict__, "num_classes": args.whiten_classes,
                              "per_class": args.whiten_per_class})
        images, names, labels = make_split(wh, args.seed + 500, prefix="w")
        io.write_dataset(out / "whiten", names, labels, images)
        written.append(out / "whiten")
    print("wrote " + ", ".join(str(p) for p in written))


def cmd_extract(args) -> None:
    dataset = io.read_dataset(args.input)
    if args.darac:
        if not args.checkpoint:
            raise UsageError("extract: --darac needs --checkpoint")
        params = io.load_head(args.checkpoint)
        extractor = ToyExtractor(channels=params.channels, seed=args.extractor_seed)
        pooled = np.stack([darac_pooled(fm) for fm in _feature_maps(dataset, extractor, args.size)])
        X = l2_normalize_rows(embed(pooled, params))
    else:
        if not args.variant:
            raise UsageError("extract: give --variant or --darac")
        extractor = ToyExtractor(channels=args.channels, seed=args.extractor_seed)
        X = l2_normalize_rows(np.stack([
            baseline_descriptor(fm, args.variant) for fm in _feature_maps(dataset, extractor, args.size)
        ]))
    io.save_descriptors(args.out, dataset.names, X)
    print(f"wrote {len(dataset)} descriptors of dimension {X.shape[1]} to {args.out}")


def _map_for(names, X, protocol) -> float:
    index = RetrievalIndex(X, names)
    missing = missing_names(index, protocol)
    if missing:
        raise io.FormatError("ground truth names not in descriptors: " + ", ".join(missing[:10]))
    return evaluate_map(index, protocol)


def cmd_pool_study(args) -> None:
    dataset = io.read_dataset(args.dataset)
    protocol = io.load_ground_truth(args.gt)
    extractor = ToyExtractor(channels=args.channels, seed=args.extractor_seed)
    table = {v: [] for v in PoolingVariant}
    for size in args.sizes:
        fms = list(_feature_maps(dataset, extractor, size))
        for v in PoolingVariant:
            X = l2_normalize_rows(np.stack([baseline_descriptor(fm, v) for fm in fms]))
            table[v].append(_map_for(dataset.names, X, protocol))
    head = f"{'variant':<18}" + "".join(f"{s:>9d}" for s in args.sizes)
    print(head)
    for v, row in table.items():
        print(f"{v.value:<18}" + "".join(f"{m:>9.4f}" for m in row))


def cmd_train(args) -> None:
    cfg = io.load_train_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if not cfg.dataset_path or not cfg.checkpoint_path:
        raise ContractError("config needs dataset_path and checkpoint_path")
    base = Path(args.config).parent
    dataset = io.read_dataset(base / cfg.dataset_path, min_per_class=cfg.n)
    init = io.load_head(base / cfg.resume_path) if cfg.resume_path else None
    params, losses = train(cfg, dataset, params=init)
    io.save_head(base / cfg.checkpoint_path, params)
    if args.log:
        Path(args.log).write_text("".join(f"{v!r}\n" for v in losses), encoding="utf-8")
    if losses:
        w = min(50, len(losses))
        print(f"steps {len(losses)}  first-{w} mean loss {np.mean(losses[:w]):.6f}  "
              f"last-{w} mean loss {np.mean(losses[-w:]):.6f}")
    print(f"wrote checkpoint {base / cfg.checkpoint_path}")


def cmd_whiten(args) -> None:
    if args.fit:
        _, F = io.load_descriptors(args.fit)
        model = fit_whitening(F)
        if args.out_model:
            io.save_whitening(args.out_model, model)
            print(f"wrote whitening model fitted on {model.fit_count} descriptors to {args.out_model}")
    elif args.model:
        model = io.load_whitening(args.model)
    else:
        raise UsageError("whiten: give --fit or --model")
    if args.inp:
        if not args.out:
            raise UsageError("whiten: --in needs --out")
        names, X = io.load_descriptors(args.inp)
        io.save_descriptors(args.out, names, apply_whitening_rows(model, X))
        print(f"wrote {len(names)} whitened descriptors to {args.out}")
    elif not args.out_model:
        raise UsageError("whiten: nothing to do, give --out-model or --in/--out")


def cmd_fuse(args) -> None:
    paths = [p for p in args.inp.split(",") if p]
    loaded = [io.load_descriptors(p) for p in paths]
    if not loaded:
        raise UsageError("fuse: --in needs at least one file")
    names = loaded[0][0]
    for p, (other, _) in zip(paths[1:], loaded[1:]):
        if other != names:
            raise io.FormatError(f"{p}: names are not aligned with {paths[0]}")
    X = fuse_multiresolution([x for _, x in loaded])
    io.save_descriptors(args.out, names, X)
    print(f"wrote {len(names)} fused descriptors to {args.out}")


def cmd_eval(args) -> None:
    names, X = io.load_descriptors(args.descriptors)
    protocol = io.load_ground_truth(args.gt)
    print(f"mAP {_map_for(names, X, protocol):.4f}")


# -- wiring --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="darac", description="Regional pooling, learned aggregation and retrieval evaluation.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("regions", help="print the region grid of a feature map")
    s.add_argument("--width", type=int, required=True)
    s.add_argument("--height", type=int, required=True)
    s.add_argument("--scales", type=int, default=3)
    s.set_defaults(func=cmd_regions)

    s = sub.add_parser("synth", help="write a synthetic train/test dataset with ground truth")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--classes", type=int, default=10)
    s.add_argument("--train-per-class", type=int, default=12)
    s.add_argument("--test-per-class", type=int, default=6)
    s.add_argument("--whiten-classes", type=int, default=30, help="classes in the whitening fit split (0 skips it)")
    s.add_argument("--whiten-per-class", type=int, default=8)
    s.add_argument("--width", type=int, default=64)
    s.add_argument("--height", type=int, default=48)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("extract", help="compute descriptors for a dataset directory")
    s.add_argument("--input", required=True)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--variant", choices=[v.value for v in PoolingVariant])
    g.add_argument("--darac", action="store_true")
    s.add_argument("--checkpoint")
    s.add_argument("--out", required=True)
    s.add_argument("--size", type=int, help="resize so the shorter side has this many pixels")
    s.add_argument("--channels", type=int, default=16)
    s.add_argument("--extractor-seed", type=int, default=0)
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("pool-study", help="mAP of the six pooling variants across input sizes")
    s.add_argument("--dataset", required=True)
    s.add_argument("--gt", required=True)
    s.add_argument("--sizes", type=_int_list, required=True)
    s.add_argument("--channels", type=int, default=16)
    s.add_argument("--extractor-seed", type=int, default=0)
    s.set_defaults(func=cmd_pool_study)

    s = sub.add_parser("train", help="train the aggregation head")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, help="override the config seed")
    s.add_argument("--log", help="write one loss value per step to this file")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("whiten", help="fit and/or apply PCA whitening")
    s.add_argument("--fit")
    s.add_argument("--out-model")
    s.add_argument("--model")
    s.add_argument("--in", dest="inp")
    s.add_argument("--out")
    s.set_defaults(func=cmd_whiten)

    s = sub.add_parser("fuse", help="sum-fuse aligned descriptor files")
    s.add_argument("--in", dest="inp", required=True, help="comma-separated descriptor files")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_fuse)

    s = sub.add_parser("eval", help="mean average precision of a descriptor file")
    s.add_argument("--descriptors", required=True)
    s.add_argument("--gt", required=True)
    s.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            raise UsageError("darac: a subcommand is required")
        args.func(args)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return 1
    except ContractError as e:
        print(f"contract violation: {e}", file=sys.stderr)
        return 3
    except (DaracError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
