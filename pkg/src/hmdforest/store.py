"""Single-file binary persistence for forests, cascades, pipelines, and
feature subsets.

Layout (all integers little-endian; see docs/format.md for the byte-exact
description): magic "HMDF", uint32 version, uint32 section count, a section
table of (name, offset, length, crc32) entries, the section payloads, and a
trailing crc32 of everything before it. Numeric payloads are little-endian
64-bit; the config snapshot is duplicated as embedded JSON text for human
inspection.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
import zlib

import numpy as np

from .cascade import CascadeConfig, CascadeLevel, CascadeModel, ScanningModel
from .errors import StoreError
from .forest import ForestModel, Tree
from .hierarchy import PipelineModel

MAGIC = b"HMDF"
VERSION = 1

KIND_FOREST = "forest"
KIND_CASCADE = "cascade"
KIND_PIPELINE = "pipeline"
KIND_FEATURE_SUBSET = "feature-subset"

_I32 = np.dtype("<i4")
_I64 = np.dtype("<i8")
_F64 = np.dtype("<f8")


# ---------------------------------------------------------------- blobs

def _forest_blob(model: ForestModel) -> bytes:
    parts = [struct.pack("<IIII", len(model.trees), model.d, model.l,
                         0 if model.mode == "random" else 1)]
    parts.append(struct.pack("<I", len(model.seed)))
    parts.append(np.asarray(model.seed, dtype=_I64).tobytes())
    for tree in model.trees:
        parts.append(struct.pack("<I", tree.n_nodes))
        parts.append(tree.feature.astype(_I32).tobytes())
        parts.append(tree.threshold.astype(_F64).tobytes())
        parts.append(tree.left.astype(_I32).tobytes())
        parts.append(tree.right.astype(_I32).tobytes())
        parts.append(tree.n_node_samples.astype(_I64).tobytes())
        parts.append(tree.dist.astype(_F64).tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, blob: bytes, name: str):
        self.blob = blob
        self.name = name
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise StoreError(f"section {self.name!r} is truncated")
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def array(self, dtype, count) -> np.ndarray:
        return np.frombuffer(self.take(dtype.itemsize * count), dtype=dtype).copy()


def _forest_from_blob(blob: bytes, name: str) -> ForestModel:
    r = _Reader(blob, name)
    n_trees, d, l, mode_code = struct.unpack("<IIII", r.take(16))
    if mode_code not in (0, 1):
        raise StoreError(f"section {name!r}: unknown forest mode {mode_code}")
    n_seed = r.u32()
    seed = tuple(int(x) for x in r.array(_I64, n_seed))
    trees = []
    for t in range(n_trees):
        m = r.u32()
        feature = r.array(_I32, m)
        threshold = r.array(_F64, m)
        left = r.array(_I32, m)
        right = r.array(_I32, m)
        counts = r.array(_I64, m)
        dist = r.array(_F64, m * l).reshape(m, l)
        internal = feature >= 0
        kids = np.concatenate([left[internal], right[internal]])
        if kids.size and (kids.min() < 0 or kids.max() >= m):
            raise StoreError(f"section {name!r} tree {t}: child index out of range")
        if np.any(feature >= d):
            raise StoreError(f"section {name!r} tree {t}: feature index out of range")
        leaves = ~internal
        if np.any(dist[leaves] < 0) or np.any(dist[leaves] > 1):
            raise StoreError(f"section {name!r} tree {t}: leaf distribution out of [0,1]")
        trees.append(Tree(feature, threshold, left, right, counts, dist))
    if r.pos != len(blob):
        raise StoreError(f"section {name!r} has trailing bytes")
    return ForestModel("random" if mode_code == 0 else "completely-random",
                       tuple(trees), n_trees, d, l, seed)


# ------------------------------------------------------------- sections

def _cascade_sections(prefix: str, model: CascadeModel) -> tuple[dict, dict[str, bytes]]:
    meta = {
        "best_layer_index": model.best_layer_index,
        "history": list(model.history),
        "stop_reason": model.stop_reason,
        "input_dim": model.input_dim,
        "raw_dim": model.raw_dim,
        "l": model.l,
        "measure": model.measure,
        "config": _config_dict(model.config),
        "levels": [
            {
                "index": lvl.index,
                "confidences": list(lvl.confidences),
                "reuse_mask": [bool(b) for b in lvl.reuse_mask],
            }
            for lvl in model.levels
        ],
        "scanner": None,
    }
    sections: dict[str, bytes] = {}
    if model.scanner is not None:
        sc = model.scanner
        meta["scanner"] = {"window": sc.window, "stride": sc.stride, "d": sc.d, "l": sc.l}
        for i, f in enumerate(sc.forests):
            sections[f"{prefix}scan/{i}"] = _forest_blob(f)
    for lvl in model.levels:
        for i, f in enumerate(lvl.forests):
            sections[f"{prefix}level{lvl.index:03d}/{i}"] = _forest_blob(f)
    return meta, sections


def _cascade_from_sections(meta: dict, sections: dict[str, bytes], prefix: str) -> CascadeModel:
    config = CascadeConfig(**{**meta["config"],
                              "seed": tuple(meta["config"]["seed"])})
    scanner = None
    if meta["scanner"] is not None:
        sm = meta["scanner"]
        forests = tuple(
            _forest_from_blob(sections[f"{prefix}scan/{i}"], f"{prefix}scan/{i}")
            for i in range(4)
        )
        scanner = ScanningModel(sm["window"], sm["stride"], forests, sm["d"], sm["l"])
    levels = []
    for lm in meta["levels"]:
        idx = lm["index"]
        forests = tuple(
            _forest_from_blob(
                sections[f"{prefix}level{idx:03d}/{i}"], f"{prefix}level{idx:03d}/{i}"
            )
            for i in range(4)
        )
        levels.append(
            CascadeLevel(
                forests=forests,
                confidences=tuple(float(c) for c in lm["confidences"]),
                reuse_mask=tuple(bool(b) for b in lm["reuse_mask"]),
                index=idx,
            )
        )
    model = CascadeModel(
        levels=tuple(levels),
        best_layer_index=meta["best_layer_index"],
        history=tuple(float(h) for h in meta["history"]),
        stop_reason=meta["stop_reason"],
        input_dim=meta["input_dim"],
        raw_dim=meta["raw_dim"],
        l=meta["l"],
        scanner=scanner,
        config=config,
        measure=meta["measure"],
    )
    if not 1 <= model.best_layer_index <= len(model.levels):
        raise StoreError("best_layer_index out of range")
    if len(model.history) != len(model.levels):
        raise StoreError("measure history does not match level count")
    return model


def _config_dict(config: CascadeConfig) -> dict:
    # threads is runtime-only and deliberately left out: the same seed must
    # produce byte-identical files regardless of worker count
    seed = config.seed if isinstance(config.seed, tuple) else (config.seed,)
    return {
        "n_trees": config.n_trees,
        "max_layers": config.max_layers,
        "patience": config.patience,
        "k_inner": config.k_inner,
        "seed": list(seed),
        "scan": config.scan,
        "window": config.window,
        "stride": config.stride,
        "scan_trees": config.scan_trees,
        "min_samples_leaf": config.min_samples_leaf,
        "max_depth": config.max_depth,
    }


def _model_sections(model) -> tuple[dict, dict[str, bytes]]:
    if isinstance(model, ForestModel):
        meta = {"kind": KIND_FOREST}
        return meta, {"forest": _forest_blob(model)}
    if isinstance(model, CascadeModel):
        if not model.levels:
            raise StoreError("cannot save an untrained cascade")
        meta, sections = _cascade_sections("", model)
        meta["kind"] = KIND_CASCADE
        return meta, sections
    if isinstance(model, PipelineModel):
        bmeta, bsec = _cascade_sections("binary/", model.binary)
        mmeta, msec = _cascade_sections("multi/", model.multilabel)
        meta = {
            "kind": KIND_PIPELINE,
            "binary": bmeta,
            "multi": mmeta,
            "tau_binary": model.tau_binary,
            "tau_labels": list(model.tau_labels),
            "label_names": list(model.label_names),
            "feature_source": model.feature_source,
        }
        return meta, {**bsec, **msec}
    if isinstance(model, np.ndarray) and model.ndim == 1 and model.dtype.kind in "iu":
        meta = {"kind": KIND_FEATURE_SUBSET}
        return meta, {"indices": model.astype(_I64).tobytes()}
    raise StoreError(f"cannot serialize object of type {type(model).__name__}")


def save(model, path: str) -> None:
    """Write a model container atomically (temp file + rename)."""
    meta, sections = _model_sections(model)
    meta["format_version"] = VERSION
    ordered = [("meta", json.dumps(meta, sort_keys=True).encode("utf-8"))]
    ordered += sorted(sections.items())

    header = [MAGIC, struct.pack("<II", VERSION, len(ordered))]
    table_size = sum(2 + len(name.encode()) + 8 + 8 + 4 for name, _ in ordered)
    offset = 4 + 8 + table_size
    for name, blob in ordered:
        nb = name.encode("utf-8")
        header.append(struct.pack("<H", len(nb)))
        header.append(nb)
        header.append(struct.pack("<QQI", offset, len(blob), zlib.crc32(blob)))
        offset += len(blob)
    body = b"".join(header) + b"".join(blob for _, blob in ordered)
    body += struct.pack("<I", zlib.crc32(body))

    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".hmdf-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(body)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_container(path: str) -> tuple[dict, dict[str, bytes]]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 16 or raw[:4] != MAGIC:
        raise StoreError("not a model container (bad magic)")
    if zlib.crc32(raw[:-4]) != struct.unpack("<I", raw[-4:])[0]:
        raise StoreError("file checksum mismatch (corrupt container)")
    version, n_sections = struct.unpack("<II", raw[4:12])
    if version != VERSION:
        raise StoreError(f"unsupported container version {version} (expected {VERSION})")
    pos = 12
    entries = []
    for _ in range(n_sections):
        (name_len,) = struct.unpack("<H", raw[pos : pos + 2])
        pos += 2
        name = raw[pos : pos + name_len].decode("utf-8")
        pos += name_len
        off, length, crc = struct.unpack("<QQI", raw[pos : pos + 20])
        pos += 20
        entries.append((name, off, length, crc))
    sections = {}
    for name, off, length, crc in entries:
        if off + length > len(raw) - 4:
            raise StoreError(f"section {name!r} overruns the file")
        blob = raw[off : off + length]
        if zlib.crc32(blob) != crc:
            raise StoreError(f"section {name!r} checksum mismatch")
        sections[name] = blob
    if "meta" not in sections:
        raise StoreError("container lacks a meta section")
    try:
        meta = json.loads(sections.pop("meta").decode("utf-8"))
    except json.JSONDecodeError as e:
        raise StoreError(f"meta section is not valid JSON: {e}") from None
    if meta.get("format_version") != VERSION:
        raise StoreError("meta format_version mismatch")
    return meta, sections


def load(path: str):
    """Load and validate a container; returns the reconstructed model."""
    meta, sections = _read_container(path)
    kind = meta.get("kind")
    try:
        if kind == KIND_FOREST:
            return _forest_from_blob(sections["forest"], "forest")
        if kind == KIND_CASCADE:
            return _cascade_from_sections(meta, sections, "")
        if kind == KIND_PIPELINE:
            binary = _cascade_from_sections(meta["binary"], sections, "binary/")
            multi = _cascade_from_sections(meta["multi"], sections, "multi/")
            return PipelineModel(
                binary=binary,
                multilabel=multi,
                tau_binary=meta["tau_binary"],
                tau_labels=tuple(meta["tau_labels"]),
                label_names=tuple(meta["label_names"]),
                feature_source=meta["feature_source"],
            )
        if kind == KIND_FEATURE_SUBSET:
            return np.frombuffer(sections["indices"], dtype=_I64).copy()
    except KeyError as e:
        raise StoreError(f"container is missing section {e}") from None
    raise StoreError(f"unknown model kind {kind!r}")
