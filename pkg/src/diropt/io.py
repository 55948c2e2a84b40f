"""JSON documents for models, policies, distortion and cost tables.

Probabilities and table values are written as shortest round-trip decimal
strings, so save -> load is exact. Rows left out of a document are
structural zeros. Pair outputs of a joint are keyed ``"x,xhat"``.
"""
from __future__ import annotations

import hashlib
import itertools
import json
from pathlib import Path

import numpy as np

from .channel import ChannelModel, CostTable, InputPolicy
from .errors import ValidationError
from .models import JointMarkovModel, MarkovSourceModel, TestChannelModel, window_contexts
from .optimality import DistortionTable
from .prob import StochasticTable

MODEL_KINDS = ("source", "test_channel", "joint", "channel", "input_policy")
TABLE_KINDS = ("distortion", "cost")


def _num(v: float) -> str:
    return repr(float(v))


def _parse_num(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (str, int, float)):
        raise ValidationError(f"{where}: expected a decimal string, got {v!r}")
    try:
        return float(v)
    except ValueError:
        raise ValidationError(f"{where}: cannot parse {v!r} as a number") from None


def _symbols(alphabet):
    """Map the string form of each symbol back to the symbol."""
    return {str(a): a for a in alphabet}


def _lookup(table: dict, value, where: str):
    try:
        return table[str(value)]
    except KeyError:
        raise ValidationError(f"{where}: unknown symbol {value!r}") from None


def _pair_key(pair) -> str:
    return f"{pair[0]},{pair[1]}"


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def document_hash(doc) -> str:
    return hashlib.sha256(canonical_json(doc).encode()).hexdigest()


def file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- writing -----------------------------------------------------------------


def _rows(table: StochasticTable, key=str, split=None):
    rows = []
    for ctx, probs, ok in zip(table.contexts, table.probs, table.defined):
        if not ok:
            continue
        row = {"context": split(ctx) if split else list(ctx)}
        row["probs"] = {key(o): _num(p) for o, p in zip(table.outputs, probs.tolist()) if p != 0}
        rows.append(row)
    return rows


def to_document(obj) -> dict:
    """Serializable document for any model or table."""
    if isinstance(obj, MarkovSourceModel):
        return {"kind": "source", "order": obj.order, "source_alphabet": list(obj.alphabet),
                "rows": _rows(obj.kernel)}
    if isinstance(obj, TestChannelModel):
        return {"kind": "test_channel", "order": obj.order,
                "source_alphabet": list(obj.source_alphabet), "recon_alphabet": list(obj.recon_alphabet),
                "rows": _rows(obj.kernel)}
    if isinstance(obj, JointMarkovModel):
        return {"kind": "joint", "order": obj.order,
                "source_alphabet": list(obj.source_alphabet), "recon_alphabet": list(obj.recon_alphabet),
                "rows": _rows(obj.kernel, key=_pair_key)}
    if isinstance(obj, ChannelModel):
        cut = obj.x_order + 1
        return {"kind": "channel", "x_order": obj.x_order, "y_order": obj.y_order,
                "input_alphabet": list(obj.input_alphabet), "output_alphabet": list(obj.output_alphabet),
                "rows": _rows(obj.kernel, split=lambda c: {"x": list(c[:cut]), "y": list(c[cut:])})}
    if isinstance(obj, InputPolicy):
        cut = obj.x_order
        return {"kind": "input_policy", "delay": obj.delay, "x_order": obj.x_order, "y_order": obj.y_order,
                "input_alphabet": list(obj.input_alphabet), "output_alphabet": list(obj.output_alphabet),
                "rows": _rows(obj.kernel, split=lambda c: {"x": list(c[:cut]), "y": list(c[cut:])})}
    if isinstance(obj, DistortionTable):
        return {"kind": "distortion", "order": obj.order, "delay": obj.delay,
                "cells": _cells(obj.values)}
    if isinstance(obj, CostTable):
        return {"kind": "cost", "x_order": obj.x_order, "y_order": obj.y_order,
                "cells": _cells(obj.values)}
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _cells(values):
    return [{"x": list(xw), "y": list(yw), "value": _num(v)} for (xw, yw), v in values.items()]


def save(obj, path) -> str:
    """Write ``obj`` as JSON and return the document hash."""
    doc = to_document(obj)
    Path(path).write_text(json.dumps(doc, indent=1, ensure_ascii=False) + "\n")
    return document_hash(doc)


save_model = save


# -- reading -----------------------------------------------------------------


def _require(doc, key, kind):
    if key not in doc:
        raise ValidationError(f"{kind} document is missing field {key!r}")
    return doc[key]


def _order(doc, key, kind):
    v = _require(doc, key, kind)
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        raise ValidationError(f"{kind}: {key} must be a nonnegative integer, got {v!r}")
    return v


def _alphabet(doc, key, kind):
    v = _require(doc, key, kind)
    if not isinstance(v, list) or not v:
        raise ValidationError(f"{kind}: {key} must be a nonempty list")
    return tuple(v)


def _read_rows(doc, kind, contexts, outputs, parse_ctx, out_keys):
    """``{context: {output: prob}}`` with row-level diagnostics."""
    rows_doc = _require(doc, "rows", kind)
    if not isinstance(rows_doc, list):
        raise ValidationError(f"{kind}: rows must be a list")
    known = set(contexts)
    rows = {}
    for i, row in enumerate(rows_doc):
        if not isinstance(row, dict) or "context" not in row or "probs" not in row:
            raise ValidationError(f"{kind}: row {i} needs 'context' and 'probs'")
        ctx = parse_ctx(row["context"], f"{kind} row {i}")
        if ctx not in known:
            raise ValidationError(f"{kind}: row {i} has context {list(ctx)} of the wrong arity")
        if ctx in rows:
            raise ValidationError(f"{kind}: duplicate row for context {list(ctx)}")
        if not isinstance(row["probs"], dict):
            raise ValidationError(f"{kind}: row {list(ctx)} probs must be an object")
        entries = {}
        for key, value in row["probs"].items():
            if key not in out_keys:
                raise ValidationError(f"{kind}: row {list(ctx)} has unknown outcome {key!r}")
            entries[out_keys[key]] = _parse_num(value, f"{kind} row {list(ctx)}")
        rows[ctx] = entries
    return StochasticTable.from_rows(rows, outputs, contexts)


def _flat_ctx(symbols):
    def parse(value, where):
        if not isinstance(value, list):
            raise ValidationError(f"{where}: context must be a list")
        return tuple(_lookup(symbols, v, where) for v in value)
    return parse


def _split_ctx(xs, ys):
    def parse(value, where):
        if not isinstance(value, dict) or set(value) != {"x", "y"}:
            raise ValidationError(f"{where}: context must be an object with 'x' and 'y' lists")
        return _flat_ctx(xs)(value["x"], where) + _flat_ctx(ys)(value["y"], where)
    return parse


def _load_markov(doc, kind):
    order = _order(doc, "order", kind)
    xa = _alphabet(doc, "source_alphabet", kind)
    xs = _symbols(xa)
    if kind == "source":
        table = _read_rows(doc, kind, window_contexts(xa, order), xa, _flat_ctx(xs), xs)
        return MarkovSourceModel(xa, order, table)
    ya = _alphabet(doc, "recon_alphabet", kind)
    if kind == "test_channel":
        table = _read_rows(doc, kind, window_contexts(xa, order + 1), ya, _flat_ctx(xs), _symbols(ya))
        return TestChannelModel(xa, ya, order, table)
    pairs = list(itertools.product(xa, ya))
    table = _read_rows(doc, kind, window_contexts(xa, order), pairs, _flat_ctx(xs),
                       {_pair_key(p): p for p in pairs})
    return JointMarkovModel(xa, ya, order, table)


def _require_complete(table: StochasticTable, kind):
    missing = [c for c, ok in zip(table.contexts, table.defined) if not ok]
    if missing:
        raise ValidationError(f"{kind}: no row for context {list(missing[0])}")


def _load_channel_side(doc, kind):
    xa = _alphabet(doc, "input_alphabet", kind)
    ya = _alphabet(doc, "output_alphabet", kind)
    mx, my = _order(doc, "x_order", kind), _order(doc, "y_order", kind)
    xs, ys = _symbols(xa), _symbols(ya)
    if kind == "channel":
        ctx = [a + b for a in window_contexts(xa, mx + 1) for b in window_contexts(ya, my)]
        table = _read_rows(doc, kind, ctx, ya, _split_ctx(xs, ys), ys)
        _require_complete(table, kind)
        return ChannelModel(xa, ya, mx, my, table)
    k = _require(doc, "delay", kind)
    if isinstance(k, bool) or not isinstance(k, int) or k < 1:
        raise ValidationError(f"{kind}: delay must be an integer >= 1, got {k!r}")
    ctx = [a + b for a in window_contexts(xa, mx) for b in window_contexts(ya, my)]
    table = _read_rows(doc, kind, ctx, xa, _split_ctx(xs, ys), xs)
    _require_complete(table, kind)
    return InputPolicy(xa, ya, k, mx, my, table)


def _load_cells(doc, kind):
    cells = _require(doc, "cells", kind)
    if not isinstance(cells, list):
        raise ValidationError(f"{kind}: cells must be a list")
    values = {}
    for i, cell in enumerate(cells):
        if not isinstance(cell, dict) or not {"x", "y", "value"} <= set(cell):
            raise ValidationError(f"{kind}: cell {i} needs 'x', 'y' and 'value'")
        if not isinstance(cell["x"], list) or not isinstance(cell["y"], list):
            raise ValidationError(f"{kind}: cell {i} windows must be lists")
        key = (tuple(cell["x"]), tuple(cell["y"]))
        if key in values:
            raise ValidationError(f"{kind}: duplicate cell {cell['x']}/{cell['y']}")
        values[key] = _parse_num(cell["value"], f"{kind} cell {cell['x']}/{cell['y']}")
    return values


def from_document(doc: dict):
    if not isinstance(doc, dict):
        raise ValidationError("document must be a JSON object")
    kind = doc.get("kind")
    if kind in ("source", "test_channel", "joint"):
        return _load_markov(doc, kind)
    if kind in ("channel", "input_policy"):
        return _load_channel_side(doc, kind)
    if kind == "distortion":
        return DistortionTable(_order(doc, "order", kind), _order(doc, "delay", kind), _load_cells(doc, kind))
    if kind == "cost":
        return CostTable(_order(doc, "x_order", kind), _order(doc, "y_order", kind), _load_cells(doc, kind))
    raise ValidationError(f"unknown document kind {kind!r}")


def read_document(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed JSON ({exc})") from None
    except OSError as exc:
        raise ValidationError(f"{path}: cannot read ({exc.strerror})") from None


def load(path):
    """Load and validate any document written by :func:`save`."""
    doc = read_document(path)
    try:
        return from_document(doc)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def load_model(path):
    obj = load(path)
    if isinstance(obj, (DistortionTable, CostTable)):
        raise ValidationError(f"{path}: expected a model, found a {type(obj).__name__}")
    return obj


def model_hash(obj) -> str:
    return document_hash(to_document(obj))


def arrays_equal(a, b) -> bool:
    """Bitwise equality of two model tables (shape, mask and every value)."""
    return (a.kernel.contexts == b.kernel.contexts and a.kernel.outputs == b.kernel.outputs
            and np.array_equal(a.kernel.defined, b.kernel.defined)
            and np.array_equal(a.kernel.probs, b.kernel.probs))
