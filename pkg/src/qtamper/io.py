"""JSON file schema for matrices, channels and schemes, and the construction
expression language used by the command line.

File layout (``schema: 1``)::

    {
      "schema": 1,
      "kind": "aqecm" | "channel",
      "matrices": {"<name>": {"rows": r, "cols": c, "data": [[re, im], ...]}},
      "shapes": {"<name>": [[label, dim, classical], ...]},
      "key_dist": {"keys": [...], "probs": [...]},
      "keyed_channels": {"enc": [{"key": k, "kraus": ["<matrix>", ...]}], "dec": [...]}
    }

Keys and messages may be nested JSON lists; they are read back as tuples.
"""

from __future__ import annotations

import ast
import json
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .channels import KrausChannel
from .constructions import (
    baseline_scheme,
    double_of,
    drop_flag,
    nfold,
    otp_with_te_key,
    parallel_compose,
    qm_of,
    rev_of,
    star_of,
    te_of,
)
from .qmath import Factor, SpaceShape
from .schemes import AqecmScheme, KeyDist

SCHEMA_VERSION = 1


class SchemaError(ValueError):
    """Malformed scheme or channel file; the message starts with the offending location."""


def _fail(where: str, msg: str):
    raise SchemaError(f"{where}: {msg}")


def _to_json_value(v):
    if isinstance(v, tuple):
        return [_to_json_value(x) for x in v]
    if isinstance(v, np.integer):
        return int(v)
    return v


def _from_json_value(v):
    if isinstance(v, list):
        return tuple(_from_json_value(x) for x in v)
    return v


def matrix_to_json(a: np.ndarray) -> dict:
    a = np.asarray(a, dtype=complex)
    flat = a.reshape(-1)
    return {"rows": int(a.shape[0]), "cols": int(a.shape[1]),
            "data": [[float(z.real), float(z.imag)] for z in flat]}


def matrix_from_json(obj: Any, where: str = "matrix") -> np.ndarray:
    if not isinstance(obj, dict):
        _fail(where, "expected an object with rows, cols and data")
    try:
        rows, cols, data = int(obj["rows"]), int(obj["cols"]), obj["data"]
    except KeyError as e:
        _fail(where, f"missing field {e.args[0]!r}")
    if rows < 1 or cols < 1:
        _fail(where, "rows and cols must be positive")
    if not isinstance(data, list) or len(data) != rows * cols:
        _fail(where, f"expected {rows * cols} entries, got {len(data) if isinstance(data, list) else 'none'}")
    try:
        arr = np.array([complex(float(re), float(im)) for re, im in data], dtype=complex)
    except (TypeError, ValueError):
        _fail(where, "entries must be [re, im] number pairs")
    return arr.reshape(rows, cols)


def shape_to_json(shape: SpaceShape) -> list:
    return [[f.label, f.dim, f.classical] for f in shape.factors]


def shape_from_json(obj: Any, where: str = "shape") -> SpaceShape:
    if not isinstance(obj, list):
        _fail(where, "expected a list of [label, dim, classical] entries")
    try:
        return SpaceShape(tuple(Factor(str(e[0]), int(e[1]), bool(e[2]) if len(e) > 2 else False)
                                for e in obj))
    except (TypeError, ValueError, IndexError) as e:
        _fail(where, str(e))


class _Writer:
    def __init__(self) -> None:
        self.matrices: dict[str, dict] = {}

    def kraus(self, prefix: str, channel) -> list[str]:
        ops = channel.to_kraus().kraus
        names = []
        for i, k in enumerate(ops):
            name = f"{prefix}/{i}"
            self.matrices[name] = matrix_to_json(k)
            names.append(name)
        return names


def channel_to_json(channel) -> dict:
    w = _Writer()
    names = w.kraus("K", channel)
    return {"schema": SCHEMA_VERSION, "kind": "channel", "matrices": w.matrices,
            "shapes": {"in": shape_to_json(channel.in_shape), "out": shape_to_json(channel.out_shape)},
            "kraus": names}


def _kraus_from(names, matrices, in_shape, out_shape, where) -> KrausChannel:
    if not isinstance(names, list) or not names:
        _fail(where, "expected a nonempty list of matrix names")
    ops = []
    for i, n in enumerate(names):
        if n not in matrices:
            _fail(f"{where}[{i}]", f"unknown matrix {n!r}")
        ops.append(matrix_from_json(matrices[n], f"matrices.{n}"))
    try:
        return KrausChannel(np.stack(ops), in_shape, out_shape)
    except ValueError as e:
        _fail(where, str(e))


def _check_header(doc: Any, kind: str) -> None:
    if not isinstance(doc, dict):
        _fail("$", "top level must be an object")
    if doc.get("schema") != SCHEMA_VERSION:
        _fail("schema", f"unsupported schema version {doc.get('schema')!r}")
    if doc.get("kind") != kind:
        _fail("kind", f"expected {kind!r}, got {doc.get('kind')!r}")
    for field in ("matrices", "shapes"):
        if field not in doc:
            _fail("$", f"missing field {field!r}")


def channel_from_json(doc: Any) -> KrausChannel:
    _check_header(doc, "channel")
    shapes = doc["shapes"]
    in_shape = shape_from_json(shapes.get("in"), "shapes.in")
    out_shape = shape_from_json(shapes.get("out"), "shapes.out")
    return _kraus_from(doc.get("kraus"), doc["matrices"], in_shape, out_shape, "kraus")


def scheme_to_json(s: AqecmScheme) -> dict:
    w = _Writer()
    enc, dec = [], []
    for i, k in enumerate(s.keys.keys):
        enc.append({"key": _to_json_value(k), "kraus": w.kraus(f"enc/{i}", s.enc(k))})
        dec.append({"key": _to_json_value(k), "kraus": w.kraus(f"dec/{i}", s.dec(k))})
    return {
        "schema": SCHEMA_VERSION,
        "kind": "aqecm",
        "name": s.name,
        "messages": [_to_json_value(m) for m in s.messages],
        "matrices": w.matrices,
        "shapes": {"message": shape_to_json(s.msg_shape), "cipher": shape_to_json(s.cipher_shape)},
        "key_dist": {"keys": [_to_json_value(k) for k in s.keys.keys], "probs": list(s.keys.probs)},
        "keyed_channels": {"enc": enc, "dec": dec},
    }


def _keyed(entries, keys, matrices, in_shape, out_shape, where) -> dict:
    if not isinstance(entries, list):
        _fail(where, "expected a list of {key, kraus} entries")
    out = {}
    for i, e in enumerate(entries):
        loc = f"{where}[{i}]"
        if not isinstance(e, dict) or "key" not in e or "kraus" not in e:
            _fail(loc, "expected an object with key and kraus")
        k = _from_json_value(e["key"])
        if k not in keys:
            _fail(f"{loc}.key", f"{k!r} is not in key_dist")
        out[k] = _kraus_from(e["kraus"], matrices, in_shape, out_shape, f"{loc}.kraus")
    missing = [k for k in keys if k not in out]
    if missing:
        _fail(where, f"no channel for keys {missing}")
    return out


def scheme_from_json(doc: Any) -> AqecmScheme:
    _check_header(doc, "aqecm")
    shapes = doc["shapes"]
    msg = shape_from_json(shapes.get("message"), "shapes.message")
    cipher = shape_from_json(shapes.get("cipher"), "shapes.cipher")
    kd = doc.get("key_dist")
    if not isinstance(kd, dict) or "keys" not in kd or "probs" not in kd:
        _fail("key_dist", "expected an object with keys and probs")
    try:
        keys = KeyDist(tuple(_from_json_value(k) for k in kd["keys"]),
                       tuple(float(p) for p in kd["probs"]))
    except (TypeError, ValueError) as e:
        _fail("key_dist", str(e))
    kc = doc.get("keyed_channels")
    if not isinstance(kc, dict):
        _fail("keyed_channels", "expected an object with enc and dec")
    flag = SpaceShape.of(("F", 2, True))
    enc = _keyed(kc.get("enc"), keys.keys, doc["matrices"], msg, cipher, "keyed_channels.enc")
    dec = _keyed(kc.get("dec"), keys.keys, doc["matrices"], cipher, msg + flag, "keyed_channels.dec")
    messages = tuple(_from_json_value(m) for m in doc.get("messages", range(msg.dim)))
    try:
        return AqecmScheme(str(doc.get("name", "loaded")), keys, messages, msg, cipher,
                           enc.__getitem__, dec.__getitem__)
    except ValueError as e:
        _fail("messages", str(e))


def save_scheme(s: AqecmScheme, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scheme_to_json(s)))


def load_scheme(path: str | Path) -> AqecmScheme:
    return scheme_from_json(_read(path))


def save_channel(c, path: str | Path) -> None:
    Path(path).write_text(json.dumps(channel_to_json(c)))


def load_channel(path: str | Path) -> KrausChannel:
    return channel_from_json(_read(path))


def _read(path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise SchemaError(f"line {e.lineno} column {e.colno}: {e.msg}") from None


def io_scheme(mode: str, path: str | Path, scheme: AqecmScheme | None = None):
    """``io_scheme("load", path)`` or ``io_scheme("save", path, scheme)``."""
    if mode == "load":
        return load_scheme(path)
    if mode == "save":
        if scheme is None:
            raise ValueError("save needs a scheme")
        save_scheme(scheme, path)
        return None
    raise ValueError(f"unknown mode {mode!r}")


# ------------------------------------------------------------ expressions


def _baseline(kind: str) -> Callable:
    def make(m: int = 2, n: int = 2):
        return baseline_scheme(kind, tuple(range(m)), n)
    return make


CONSTRUCTORS: dict[str, Callable] = {
    "triv_reject": _baseline("triv_reject"),
    "id_accept": _baseline("id_accept"),
    "otp_accept": _baseline("otp_accept"),
    "qotp_accept": _baseline("qotp_accept"),
    "conj_parity_pad": lambda n=2: baseline_scheme("conj_parity_pad", n=n),
    "parallel": parallel_compose,
    "nfold": nfold,
    "double": double_of,
    "star": star_of,
    "otp_te": otp_with_te_key,
    "drop_flag": drop_flag,
    "rev": rev_of,
    "te": te_of,
    "qm": qm_of,
    "load": load_scheme,
}


class ExpressionError(ValueError):
    pass


def _eval(node: ast.AST):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, str, bool)):
        return node.value
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
        return -_eval(node.operand)
    if isinstance(node, ast.Tuple):
        return tuple(_eval(e) for e in node.elts)
    if isinstance(node, ast.Name):
        if node.id not in CONSTRUCTORS:
            raise ExpressionError(f"unknown construction {node.id!r}")
        return CONSTRUCTORS[node.id]()
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        fn = CONSTRUCTORS.get(node.func.id)
        if fn is None:
            raise ExpressionError(f"unknown construction {node.func.id!r}")
        args = [_eval(a) for a in node.args]
        kwargs = {k.arg: _eval(k.value) for k in node.keywords}
        try:
            return fn(*args, **kwargs)
        except TypeError as e:
            raise ExpressionError(f"{node.func.id}: {e}") from None
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)[:60]}")


def parse_expression(text: str):
    """Evaluate a construction expression such as ``double(conj_parity_pad(n=3))``."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as e:
        raise ExpressionError(f"syntax error at column {e.offset}: {e.msg}") from None
    return _eval(tree.body)
