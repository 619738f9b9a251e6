"""Versioned JSON text format for fitted trees.

Layout::

    {"format": "detree", "format_version": 1, "d": ..., "n_total": ...,
     "bounds": {"lower": [...], "upper": [...]},
     "config": {...}, "whiten": null | {"mean": [...], "transform": [[...]]},
     "warnings": {...},
     "nodes": [{"type": "interim", "split_dim": 0, "threshold": 0.5, "count": 10},
               {"type": "leaf", "count": 4, "thetas": [0.1]}, ...]}

Nodes are listed in pre-order.  Floats use Python's shortest round-trip
representation, which restores every double bit for bit.
"""

from __future__ import annotations

import json
from os import PathLike
from typing import Union

import numpy as np

from .ensemble import DomainBounds, WhitenTransform
from .errors import FormatError
from .tree import BuildConfig, DetTree, NodeTable

FORMAT_NAME = "detree"
FORMAT_VERSION = 1


def _dump(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def _floats(arr) -> list:
    return [float(v) for v in np.asarray(arr).ravel()]


def serialize(tree: DetTree) -> bytes:
    header = {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "d": tree.d,
        "n_total": tree.n_total,
        "bounds": {"lower": _floats(tree.bounds.lower), "upper": _floats(tree.bounds.upper)},
        "config": tree.config.to_dict(),
        "whiten": None if tree.whiten is None else {
            "mean": _floats(tree.whiten.mean),
            "transform": [_floats(row) for row in tree.whiten.transform],
        },
        "warnings": {"max_depth": tree.stats.max_depth_hits,
                     "unsplittable": tree.stats.unsplittable},
    }
    nodes = tree.nodes
    lines = []
    for i in range(len(nodes)):
        dim = int(nodes.split_dim[i])
        if dim >= 0:
            rec = {"type": "interim", "split_dim": dim, "threshold": float(nodes.threshold[i]),
                   "count": int(nodes.count[i])}
        else:
            rec = {"type": "leaf", "count": int(nodes.count[i]), "thetas": _floats(nodes.thetas[i])}
        lines.append(_dump(rec))
    head = _dump(header)[:-1]
    text = head + ',"nodes":[\n' + ",\n".join(lines) + "\n]}\n"
    return text.encode("utf-8")


def _require(obj, key, kind, where="document"):
    if not isinstance(obj, dict) or key not in obj:
        raise FormatError(f"missing field {key!r} in {where}")
    value = obj[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise FormatError(f"field {key!r} in {where} has wrong type {type(value).__name__}")
    return value


def _check_preorder(split_dim: np.ndarray):
    # every interim node opens two slots, every node fills one
    open_slots = 1
    for i, dim in enumerate(split_dim):
        if open_slots == 0:
            raise FormatError(f"node {i} follows a complete tree")
        open_slots += 1 if dim >= 0 else -1
    if open_slots != 0:
        raise FormatError(f"node list ends with {open_slots} missing subtree(s) (truncated?)")


def deserialize(data: Union[bytes, str]) -> DetTree:
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError("not UTF-8 text", offset=exc.start) from None
    else:
        text = data
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", offset=exc.pos) from None
    if not isinstance(doc, dict):
        raise FormatError("top level is not an object", offset=0)
    if doc.get("format") != FORMAT_NAME:
        raise FormatError(f"not a {FORMAT_NAME} document")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatError(f"format_version {version!r} not supported (expected {FORMAT_VERSION})")
    d = _require(doc, "d", int)
    n_total = _require(doc, "n_total", int)
    bounds = _require(doc, "bounds", dict)
    try:
        dom = DomainBounds(_require(bounds, "lower", list, "bounds"),
                           _require(bounds, "upper", list, "bounds"))
        config = BuildConfig.from_dict(_require(doc, "config", dict))
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"invalid header: {exc}") from None
    if dom.d != d:
        raise FormatError(f"bounds have {dom.d} entries, d={d}")
    whiten = None
    wdoc = doc.get("whiten")
    if wdoc is not None:
        try:
            mean = np.array(_require(wdoc, "mean", list, "whiten"), dtype=np.float64)
            mat = np.array(_require(wdoc, "transform", list, "whiten"), dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise FormatError(f"invalid whiten block: {exc}") from None
        if mean.shape != (d,) or mat.shape != (d, d):
            raise FormatError("whiten block has wrong shape")
        whiten = WhitenTransform.from_arrays(mean, mat)
    warnings = doc.get("warnings") or {}
    records = _require(doc, "nodes", list)
    n_nodes = len(records)
    split_dim = np.full(n_nodes, -1, dtype=np.intp)
    threshold = np.full(n_nodes, np.nan)
    count = np.zeros(n_nodes, dtype=np.int64)
    thetas = np.zeros((n_nodes, d))
    for i, rec in enumerate(records):
        where = f"node {i}"
        kind = _require(rec, "type", str, where)
        count[i] = _require(rec, "count", int, where)
        if kind == "interim":
            dim = _require(rec, "split_dim", int, where)
            if not 0 <= dim < d:
                raise FormatError(f"{where}: split_dim {dim} out of range")
            split_dim[i] = dim
            threshold[i] = _require(rec, "threshold", float, where)
        elif kind == "leaf":
            th = _require(rec, "thetas", list, where)
            if len(th) != d:
                raise FormatError(f"{where}: expected {d} thetas, got {len(th)}")
            try:
                thetas[i] = np.array(th, dtype=np.float64)
            except (TypeError, ValueError):
                raise FormatError(f"{where}: non-numeric thetas") from None
        else:
            raise FormatError(f"{where}: unknown node type {kind!r}")
    if n_nodes == 0:
        raise FormatError("tree has no nodes")
    _check_preorder(split_dim)
    leaf_total = int(count[split_dim < 0].sum())
    if leaf_total != n_total:
        raise FormatError(f"leaf counts sum to {leaf_total}, n_total={n_total}")
    return DetTree(dom, config, n_total, NodeTable(split_dim, threshold, count, thetas), whiten,
                   warnings)


def save(tree: DetTree, path: Union[str, PathLike]) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize(tree))


def load(path: Union[str, PathLike]) -> DetTree:
    with open(path, "rb") as fh:
        return deserialize(fh.read())
