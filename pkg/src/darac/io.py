"""On-disk formats: head checkpoints, whitening models, descriptor files,
ground truth, training configs, datasets and PPM images."""

from __future__ import annotations

import struct
from dataclasses import fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import FormatError
from .head import POOLED_ROWS, HeadParams
from .postprocess import WhiteningModel
from .retrieval import Query
from .training import Item, LabeledDataset, TrainConfig

HEAD_MAGIC = b"DRCH1\n"
WHITENING_MAGIC = b"DRCW1\n"
DESCRIPTOR_MAGIC = b"DRCF1\n"
F64 = np.dtype("<f8")
F32 = np.dtype("<f4")


def _read_header(buf: bytes, magic: bytes, keys: Sequence[str], path) -> tuple[dict, int]:
    if not buf.startswith(magic):
        raise FormatError(f"{path}: bad magic, expected {magic!r}")
    pos = len(magic)
    header = {}
    for key in keys:
        end = buf.find(b"\n", pos)
        if end < 0:
            raise FormatError(f"{path}: truncated header")
        line = buf[pos:end].decode("ascii", errors="replace")
        name, _, value = line.partition("=")
        if name != key:
            raise FormatError(f"{path}: expected header {key}=..., got {line!r}")
        try:
            header[key] = int(value)
        except ValueError:
            raise FormatError(f"{path}: header {key} is not an integer: {value!r}") from None
        pos = end + 1
    return header, pos


def _take(buf: bytes, pos: int, count: int, path) -> tuple[np.ndarray, int]:
    nbytes = count * 8
    if pos + nbytes > len(buf):
        raise FormatError(f"{path}: truncated payload")
    return np.frombuffer(buf, dtype=F64, count=count, offset=pos).astype(np.float64), pos + nbytes


# -- head checkpoint -------------------------------------------------------
# payload order: layer1_weights, layer1_bias, layer2_weights, layer2_bias,
# bn_running_mean, bn_running_var, bn_epsilon, bn_momentum


def save_head(path, params: HeadParams) -> None:
    if params.rows != POOLED_ROWS:
        raise FormatError(f"checkpoints hold {POOLED_ROWS}-row heads, got {params.rows}")
    parts = [HEAD_MAGIC, f"L_head={params.L_head}\n".encode(), f"C={params.channels}\n".encode()]
    for f in fields(HeadParams):
        v = np.asarray(getattr(params, f.name), dtype=F64)
        parts.append(v.tobytes(order="C"))
    Path(path).write_bytes(b"".join(parts))


def load_head(path) -> HeadParams:
    buf = Path(path).read_bytes()
    hdr, pos = _read_header(buf, HEAD_MAGIC, ("L_head", "C"), path)
    L, C = hdr["L_head"], hdr["C"]
    if L < 1 or C < 1:
        raise FormatError(f"{path}: invalid sizes L_head={L} C={C}")
    shapes = {
        "layer1_weights": (L, POOLED_ROWS),
        "layer1_bias": (L,),
        "layer2_weights": (L,),
        "layer2_bias": (1,),
        "bn_running_mean": (L, C),
        "bn_running_var": (L, C),
        "bn_epsilon": (),
        "bn_momentum": (),
    }
    kw = {}
    for f in fields(HeadParams):
        shape = shapes[f.name]
        arr, pos = _take(buf, pos, int(np.prod(shape)), path)
        kw[f.name] = float(arr[0]) if shape == () else arr.reshape(shape)
    if pos != len(buf):
        raise FormatError(f"{path}: {len(buf) - pos} trailing bytes")
    return HeadParams(**kw)


# -- whitening model -------------------------------------------------------


def save_whitening(path, model: WhiteningModel) -> None:
    Path(path).write_bytes(b"".join([
        WHITENING_MAGIC,
        f"C={model.dim}\n".encode(),
        f"fit_count={model.fit_count}\n".encode(),
        np.asarray(model.mean, dtype=F64).tobytes(),
        np.asarray(model.projection, dtype=F64).tobytes(order="C"),
    ]))


def load_whitening(path) -> WhiteningModel:
    buf = Path(path).read_bytes()
    hdr, pos = _read_header(buf, WHITENING_MAGIC, ("C", "fit_count"), path)
    C = hdr["C"]
    mean, pos = _take(buf, pos, C, path)
    proj, pos = _take(buf, pos, C * C, path)
    if pos != len(buf):
        raise FormatError(f"{path}: {len(buf) - pos} trailing bytes")
    return WhiteningModel(mean, proj.reshape(C, C), hdr["fit_count"])


# -- descriptor files --------------------------------------------------------


def manifest_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".names")


def save_descriptors(path, names: Sequence[str], descriptors) -> None:
    """Write the binary block and its ``.names`` manifest."""
    X = np.asarray(descriptors)
    if X.ndim != 2 or X.shape[0] != len(names):
        raise FormatError(f"need an N x C block matching {len(names)} names, got {X.shape}")
    if len(set(names)) != len(names):
        raise FormatError("descriptor names must be unique")
    for n in names:
        if not n or "\n" in n:
            raise FormatError(f"invalid descriptor name {n!r}")
    N, C = X.shape
    Path(path).write_bytes(DESCRIPTOR_MAGIC + struct.pack("<II", N, C) + X.astype(F32).tobytes(order="C"))
    manifest_path(path).write_text("".join(f"{n}\n" for n in names), encoding="utf-8")


def load_descriptors(path) -> tuple[list[str], np.ndarray]:
    """Names and a float64 ``N x C`` array (values are stored as float32)."""
    buf = Path(path).read_bytes()
    if not buf.startswith(DESCRIPTOR_MAGIC):
        raise FormatError(f"{path}: bad magic, expected {DESCRIPTOR_MAGIC!r}")
    pos = len(DESCRIPTOR_MAGIC)
    if len(buf) < pos + 8:
        raise FormatError(f"{path}: truncated header")
    N, C = struct.unpack_from("<II", buf, pos)
    pos += 8
    if len(buf) != pos + 4 * N * C:
        raise FormatError(f"{path}: payload holds {len(buf) - pos} bytes, expected {4 * N * C}")
    X = np.frombuffer(buf, dtype=F32, count=N * C, offset=pos).reshape(N, C).astype(np.float64)
    mpath = manifest_path(path)
    try:
        names = mpath.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise FormatError(f"{path}: manifest {mpath} is missing") from None
    if len(names) != N:
        raise FormatError(f"{mpath}: {len(names)} names for {N} descriptors")
    if len(set(names)) != N:
        raise FormatError(f"{mpath}: names are not unique")
    return names, X


# -- ground truth ------------------------------------------------------------


def _split_names(field: str) -> list[str]:
    return [s for s in field.split(",") if s]


def parse_ground_truth(text: str) -> list[Query]:
    """Lines of ``query<TAB>pos1,pos2,...<TAB>junk1,...``; the junk field may be empty."""
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) not in (2, 3):
            raise FormatError(f"ground truth line {lineno}: expected 2 or 3 tab-separated fields")
        junk = _split_names(cols[2]) if len(cols) == 3 else []
        positives = _split_names(cols[1])
        if not positives:
            raise FormatError(f"ground truth line {lineno}: query {cols[0]} has no positives")
        out.append(Query(cols[0], frozenset(positives), frozenset(junk)))
    return out


def load_ground_truth(path) -> list[Query]:
    return parse_ground_truth(Path(path).read_text(encoding="utf-8"))


def format_ground_truth(protocol: Sequence[Query]) -> str:
    return "".join(
        f"{q.name}\t{','.join(sorted(q.positives))}\t{','.join(sorted(q.junk))}\n" for q in protocol
    )


# -- training config ---------------------------------------------------------


def _parse_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("1", "true", "yes"):
        return True
    if low in ("0", "false", "no"):
        return False
    raise ValueError(s)


def parse_train_config(text: str) -> TrainConfig:
    """``key=value`` lines; ``#`` starts a comment line."""
    cfg = TrainConfig()
    types = {f.name: f.type for f in fields(TrainConfig)}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or key not in types:
            raise FormatError(f"config line {lineno}: unknown or malformed entry {line!r}")
        t = types[key]
        try:
            if key == "crop_side":
                parsed = tuple(int(v) for v in value.split(",")) if value else None
                if parsed is not None and len(parsed) != 2:
                    raise ValueError(value)
            elif key == "augment":
                parsed = _parse_bool(value)
            elif "int" in t:
                parsed = int(value)
            elif "float" in t:
                parsed = float(value)
            else:
                parsed = value or None
        except ValueError:
            raise FormatError(f"config line {lineno}: bad value for {key}: {value!r}") from None
        setattr(cfg, key, parsed)
    return cfg


def load_train_config(path) -> TrainConfig:
    return parse_train_config(Path(path).read_text(encoding="utf-8"))


# -- PPM images and dataset directories -------------------------------------


def _ppm_tokens(buf: bytes, count: int, pos: int) -> tuple[list[bytes], int]:
    tokens = []
    n = len(buf)
    while len(tokens) < count:
        while pos < n and buf[pos:pos + 1].isspace():
            pos += 1
        if pos < n and buf[pos:pos + 1] == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise FormatError("truncated PPM header")
        tokens.append(buf[start:pos])
    return tokens, pos


def read_ppm(path) -> np.ndarray:
    """Read a binary (P6) or ASCII (P3) portable pixmap as ``H x W x 3`` uint8."""
    buf = Path(path).read_bytes()
    magic = buf[:2]
    if magic not in (b"P6", b"P3"):
        raise FormatError(f"{path}: not a P3/P6 pixmap")
    try:
        (w, h, maxval), pos = _ppm_tokens(buf, 3, 2)
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise FormatError(f"{path}: malformed PPM header") from None
    if w < 1 or h < 1 or not 0 < maxval < 256:
        raise FormatError(f"{path}: unsupported PPM size or maxval")
    if magic == b"P6":
        pos += 1
        if len(buf) < pos + w * h * 3:
            raise FormatError(f"{path}: truncated pixel data")
        data = np.frombuffer(buf, dtype=np.uint8, count=w * h * 3, offset=pos)
    else:
        try:
            data = np.array(buf[pos:].split()[: w * h * 3], dtype=np.int64)
        except ValueError:
            raise FormatError(f"{path}: malformed ASCII pixel data") from None
        if data.size != w * h * 3:
            raise FormatError(f"{path}: truncated pixel data")
    img = data.reshape(h, w, 3).astype(np.float64)
    if maxval != 255:
        img = img * (255.0 / maxval)
    return np.rint(img).astype(np.uint8)


def write_ppm(path, image) -> None:
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise FormatError(f"expected an H x W x 3 image, got {img.shape}")
    h, w = img.shape[:2]
    Path(path).write_bytes(f"P6\n{w} {h}\n255\n".encode() + np.clip(img, 0, 255).astype(np.uint8).tobytes())


LABELS_FILE = "labels.tsv"


def write_dataset(directory, names: Sequence[str], labels: Sequence, images: Sequence) -> None:
    """``labels.tsv`` (``name<TAB>class``) plus one ``<name>.ppm`` per item."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for n, im in zip(names, images):
        write_ppm(d / f"{n}.ppm", im)
    (d / LABELS_FILE).write_text("".join(f"{n}\t{l}\n" for n, l in zip(names, labels)), encoding="utf-8")


def read_dataset(directory, min_per_class: int = 1) -> LabeledDataset:
    d = Path(directory)
    lf = d / LABELS_FILE
    if not lf.is_file():
        raise FormatError(f"{d}: missing {LABELS_FILE}")
    items = []
    for lineno, line in enumerate(lf.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != 2:
            raise FormatError(f"{lf}:{lineno}: expected name<TAB>class")
        items.append(Item(cols[0], cols[1], read_ppm(d / f"{cols[0]}.ppm")))
    return LabeledDataset(items, min_per_class=min_per_class)
