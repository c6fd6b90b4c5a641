"""Plain-text file formats: feature matrices, named weight blocks, labels, coupling CSV, PGM.

Feature file::

    <rows> <cols>
    x11 x12 ... x1c
    ...

Weights file: a sequence of named blocks, each ``<name> <rows> <cols>``
followed by that many rows (biases and gains are 1-row blocks, ``s`` is 1x1).

Labels file::

    <count> <cls_id> <sep_id>
    id1 id2 ... id_count
"""

import math
import os
import tempfile

import numpy as np

from .transfer import AdapterWeights, TokenSequence


class ParseError(ValueError):
    def __init__(self, path, lineno, message):
        self.path = path
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


def format_float(x):
    """Shortest decimal string that round-trips to the same float."""
    return repr(float(x))


def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temporary file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_header(path, lineno, line, n):
    fields = line.split()
    if len(fields) != n:
        raise ParseError(path, lineno, f"expected {n} header fields, got {len(fields)}")
    return fields


def _parse_int(path, lineno, token, minimum=None):
    try:
        value = int(token)
    except ValueError:
        raise ParseError(path, lineno, f"not an integer: {token!r}") from None
    if minimum is not None and value < minimum:
        raise ParseError(path, lineno, f"expected an integer >= {minimum}, got {value}")
    return value


def _parse_row(path, lineno, line, cols):
    fields = line.split()
    if len(fields) != cols:
        raise ParseError(path, lineno, f"expected {cols} values, got {len(fields)}")
    try:
        row = [float(f) for f in fields]
    except ValueError as exc:
        raise ParseError(path, lineno, str(exc)) from None
    if not all(math.isfinite(v) for v in row):
        raise ParseError(path, lineno, "non-finite value")
    return row


def _read_lines(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    return lines


def format_matrix_rows(M):
    return "".join(" ".join(format_float(v) for v in row) + "\n" for row in np.asarray(M))


def read_features(path):
    lines = _read_lines(path)
    if not lines:
        raise ParseError(path, 1, "empty file")
    rows_s, cols_s = _parse_header(path, 1, lines[0], 2)
    rows = _parse_int(path, 1, rows_s, 1)
    cols = _parse_int(path, 1, cols_s, 1)
    if len(lines) != rows + 1:
        raise ParseError(path, len(lines), f"expected {rows} data lines, found {len(lines) - 1}")
    data = [_parse_row(path, k + 2, lines[k + 1], cols) for k in range(rows)]
    return np.array(data, dtype=np.float64)


def format_features(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"feature matrix must be non-empty 2-D, got shape {X.shape}")
    return f"{X.shape[0]} {X.shape[1]}\n" + format_matrix_rows(X)


def write_features(path, X):
    atomic_write(path, format_features(X))


_WEIGHT_BLOCKS = (
    "fc2.weight", "fc2.bias", "fc3.weight", "fc3.bias", "fc1.weight", "fc1.bias",
    "ln1.gain", "ln1.bias", "ln2.gain", "ln2.bias", "s",
)


def format_weights(weights):
    out = []
    for name in _WEIGHT_BLOCKS:
        value = weights.s if name == "s" else getattr(weights, name.replace(".", "_"))
        block = np.atleast_2d(np.asarray(value, dtype=np.float64))
        out.append(f"{name} {block.shape[0]} {block.shape[1]}\n")
        out.append(format_matrix_rows(block))
    return "".join(out)


def write_weights(path, weights):
    atomic_write(path, format_weights(weights))


def read_weights(path):
    lines = _read_lines(path)
    blocks = {}
    k = 0
    while k < len(lines):
        if not lines[k].strip():
            k += 1
            continue
        name, rows_s, cols_s = _parse_header(path, k + 1, lines[k], 3)
        if name not in _WEIGHT_BLOCKS:
            raise ParseError(path, k + 1, f"unknown block {name!r}")
        if name in blocks:
            raise ParseError(path, k + 1, f"duplicate block {name!r}")
        rows = _parse_int(path, k + 1, rows_s, 1)
        cols = _parse_int(path, k + 1, cols_s, 1)
        if k + 1 + rows > len(lines):
            raise ParseError(path, len(lines), f"block {name!r} truncated")
        blocks[name] = np.array(
            [_parse_row(path, k + 2 + r, lines[k + 1 + r], cols) for r in range(rows)]
        )
        k += rows + 1
    missing = [n for n in _WEIGHT_BLOCKS if n not in blocks]
    if missing:
        raise ParseError(path, len(lines), f"missing blocks: {', '.join(missing)}")
    kwargs = {}
    for name, block in blocks.items():
        if name == "s":
            kwargs["s"] = float(block[0, 0])
        elif name.endswith("weight"):
            kwargs[name.replace(".", "_")] = block
        else:
            kwargs[name.replace(".", "_")] = block.ravel()
    try:
        return AdapterWeights(**kwargs)
    except ValueError as exc:
        raise ParseError(path, 1, str(exc)) from None


def format_labels(tokens):
    return (f"{len(tokens.ids)} {tokens.cls_id} {tokens.sep_id}\n"
            + " ".join(str(i) for i in tokens.ids) + "\n")


def write_labels(path, tokens):
    atomic_write(path, format_labels(tokens))


def read_labels(path):
    lines = _read_lines(path)
    if len(lines) != 2:
        raise ParseError(path, max(len(lines), 1), "labels file must have exactly 2 lines")
    n_s, cls_s, sep_s = _parse_header(path, 1, lines[0], 3)
    n = _parse_int(path, 1, n_s, 2)
    cls_id = _parse_int(path, 1, cls_s, 0)
    sep_id = _parse_int(path, 1, sep_s, 0)
    ids = [_parse_int(path, 2, tok, 0) for tok in lines[1].split()]
    if len(ids) != n:
        raise ParseError(path, 2, f"expected {n} ids, got {len(ids)}")
    try:
        return TokenSequence(ids, cls_id, sep_id)
    except ValueError as exc:
        raise ParseError(path, 2, str(exc)) from None


def format_coupling_csv(plan):
    return "".join(",".join(format_float(v) for v in row) + "\n" for row in np.asarray(plan))


def write_coupling_csv(path, plan):
    atomic_write(path, format_coupling_csv(plan))


def read_coupling_csv(path):
    lines = _read_lines(path)
    if not lines:
        raise ParseError(path, 1, "empty coupling matrix")
    rows = []
    for k, line in enumerate(lines, start=1):
        try:
            row = [float(f) for f in line.split(",")]
        except ValueError as exc:
            raise ParseError(path, k, str(exc)) from None
        if rows and len(row) != len(rows[0]):
            raise ParseError(path, k, f"expected {len(rows[0])} values, got {len(row)}")
        if not all(math.isfinite(v) and v >= 0 for v in row):
            raise ParseError(path, k, "coupling entries must be finite and non-negative")
        rows.append(row)
    return np.array(rows, dtype=np.float64)


def coupling_to_pgm(plan):
    """Render a coupling as a plain (P2) graymap: largest entry black, zero white."""
    plan = np.asarray(plan, dtype=np.float64)
    if plan.ndim != 2 or plan.size == 0:
        raise ValueError("cannot render an empty coupling")
    top = plan.max()
    if top > 0:
        pixels = np.rint(255.0 * (1.0 - plan / top)).astype(int)
    else:
        pixels = np.full(plan.shape, 255, dtype=int)
    pixels = np.clip(pixels, 0, 255)
    height, width = plan.shape
    body = "".join(" ".join(str(p) for p in row) + "\n" for row in pixels)
    return f"P2\n{width} {height}\n255\n{body}"


def write_pgm(path, plan):
    atomic_write(path, coupling_to_pgm(plan))


def read_pgm(path):
    """Parse a P2 graymap written by :func:`write_pgm`; returns an int matrix."""
    tokens = []
    for line in _read_lines(path):
        tokens += line.split("#", 1)[0].split()
    if not tokens or tokens[0] != "P2":
        raise ParseError(path, 1, "not a P2 graymap")
    width, height, maxval = (int(t) for t in tokens[1:4])
    values = [int(t) for t in tokens[4:]]
    if len(values) != width * height:
        raise ParseError(path, 1, f"expected {width * height} pixels, got {len(values)}")
    if any(not 0 <= v <= maxval for v in values):
        raise ParseError(path, 1, "pixel value out of range")
    return np.array(values, dtype=int).reshape(height, width)
