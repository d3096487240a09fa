"""Text formats for grids, matrices and certificate manifests.

Canonical grid file::

    M N
    c00 c01 ... c0,N-1
    ...

Canonical matrix file: first line ``dim``, then ``dim`` lines of ``dim``
rationals; entry (i, j) is the coefficient of P_i in A P_j.

Rationals are written ``num/den`` or as bare integers. Decimal literals are
refused everywhere, since these files feed exact computations.

The reader also accepts nested-brace lists such as ``{{1/2,-1/3},{0,2}}``,
the format Mathematica's ``Put`` produces. For matrices stored that way,
entry [[i+1, j+1]] is the coefficient of P_j in A P_i, so they are transposed
on load unless told otherwise.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from gmpy2 import mpq

from .errors import ParseError
from .fourier import CoeffGrid, format_rational, parse_rational
from .operators import AcalMatrix

_TOKEN = re.compile(r"\s*([{},]|[^\s{},]+)")
_RATIONAL = re.compile(r"[+-]?\d+(/\d+)?\Z")


def _rational(token: str, line: int, path) -> mpq:
    if not _RATIONAL.match(token):
        raise ParseError(f"not an exact rational: {token!r}", line, path)
    try:
        return parse_rational(token)
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(str(exc), line, path) from None


def parse_nested_list(text: str, path=None) -> list[list[mpq]]:
    """Parse a two-level brace list of rationals into rectangular rows."""
    # Mathematica wraps long integers with a backslash-newline continuation,
    # and data files may read "name = {...};" with (* comments *).
    text = re.sub(r"\\\r?\n", "", text)
    text = re.sub(r"\(\*.*?\*\)", lambda m: "\n" * m.group(0).count("\n"), text, flags=re.S)
    head = re.match(r"\s*[A-Za-z$][\w$]*\s*=(?!=)", text)
    if head:
        text = " " * head.end() + text[head.end():]
    text = re.sub(r";\s*\Z", "", text)
    line = 1
    pos = 0
    tokens: list[tuple[str, int]] = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        line += text.count("\n", pos, m.start(1))
        tokens.append((m.group(1), line))
        pos = m.end()

    rows: list[list[mpq]] = []
    depth = 0
    current: list[mpq] | None = None
    expect_value = False
    closed_outer = False
    for tok, ln in tokens:
        if closed_outer:
            raise ParseError(f"unexpected {tok!r} after the closing brace", ln, path)
        if tok == "{":
            depth += 1
            if depth > 2:
                raise ParseError("nesting deeper than two levels", ln, path)
            if depth == 2:
                current = []
            expect_value = depth == 2
        elif tok == "}":
            if depth == 0:
                raise ParseError("unbalanced '}'", ln, path)
            if depth == 2:
                if current is None or not current:
                    raise ParseError("empty row", ln, path)
                if rows and len(current) != len(rows[0]):
                    raise ParseError(f"ragged row: {len(current)} entries, expected {len(rows[0])}", ln, path)
                rows.append(current)
                current = None
            else:
                closed_outer = True
            depth -= 1
        elif tok == ",":
            if depth == 2:
                if expect_value:
                    raise ParseError("missing value before ','", ln, path)
                expect_value = True
            elif depth != 1:
                raise ParseError("',' outside the list", ln, path)
        else:
            if depth != 2:
                raise ParseError(f"value {tok!r} outside a row", ln, path)
            if not expect_value:
                raise ParseError(f"missing ',' before {tok!r}", ln, path)
            current.append(_rational(tok, ln, path))
            expect_value = False
    if depth != 0 or not closed_outer:
        raise ParseError("unbalanced braces", line, path)
    if not rows:
        raise ParseError("empty list", line, path)
    return rows


def _parse_canonical(text: str, header_len: int, path) -> list[list[mpq]]:
    lines = [(i + 1, ln.split("#", 1)[0].strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(i, ln) for i, ln in lines if ln]
    if not lines:
        raise ParseError("empty file", None, path)
    hline, header = lines[0]
    parts = header.split()
    if len(parts) != header_len or not all(p.isdigit() for p in parts):
        raise ParseError(f"header must hold {header_len} positive integer(s)", hline, path)
    dims = [int(p) for p in parts]
    if any(d < 1 for d in dims):
        raise ParseError("dimensions must be positive", hline, path)
    nrows = dims[0]
    ncols = dims[-1]
    body = lines[1:]
    if len(body) != nrows:
        where = body[-1][0] if body else hline
        raise ParseError(f"expected {nrows} rows, found {len(body)}", where, path)
    rows = []
    for ln, content in body:
        toks = content.split()
        if len(toks) != ncols:
            raise ParseError(f"expected {ncols} entries, found {len(toks)}", ln, path)
        rows.append([_rational(t, ln, path) for t in toks])
    return rows


def _is_nested(text: str) -> bool:
    return re.match(r"\s*(\(\*.*?\*\)\s*)*([A-Za-z$][\w$]*\s*=\s*)?\{", text, flags=re.S) is not None


def parse_grid(text: str, path=None) -> CoeffGrid:
    rows = parse_nested_list(text, path) if _is_nested(text) else _parse_canonical(text, 2, path)
    return CoeffGrid(rows)


def parse_matrix(text: str, path=None, layout: str | None = None) -> AcalMatrix:
    if _is_nested(text):
        rows = parse_nested_list(text, path)
        layout = layout or "rows"
    else:
        rows = _parse_canonical(text, 1, path)
        layout = layout or "columns"
    if len(rows) != len(rows[0]):
        raise ParseError(f"matrix is {len(rows)}x{len(rows[0])}, not square", None, path)
    try:
        return AcalMatrix.from_rows(rows, layout)
    except ValueError as exc:
        raise ParseError(str(exc), None, path) from None


def read_grid(path) -> CoeffGrid:
    path = Path(path)
    return parse_grid(path.read_text(encoding="utf-8"), path)


def read_matrix(path, layout: str | None = None) -> AcalMatrix:
    path = Path(path)
    return parse_matrix(path.read_text(encoding="utf-8"), path, layout)


def ingest_nested_list(path, kind: str = "grid", layout: str = "rows"):
    """Read a brace-list file as a coefficient grid or as an Acal block."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if kind == "grid":
        return CoeffGrid(parse_nested_list(text, path))
    if kind == "acal":
        rows = parse_nested_list(text, path)
        if len(rows) != len(rows[0]):
            raise ParseError(f"matrix is {len(rows)}x{len(rows[0])}, not square", None, path)
        try:
            return AcalMatrix.from_rows(rows, layout)
        except ValueError as exc:
            raise ParseError(str(exc), None, path) from None
    raise ValueError(f"unknown kind {kind!r}")


def format_grid(grid: CoeffGrid) -> str:
    M, N = grid.shape
    lines = [f"{M} {N}"]
    lines += [" ".join(format_rational(x) for x in row) for row in grid.rows]
    return "\n".join(lines) + "\n"


def format_matrix(acal: AcalMatrix) -> str:
    lines = [str(acal.dim)]
    lines += [" ".join(format_rational(x) for x in row) for row in acal.entries]
    return "\n".join(lines) + "\n"


def write_grid(grid: CoeffGrid, path) -> None:
    Path(path).write_text(format_grid(grid), encoding="utf-8")


def write_matrix(acal: AcalMatrix, path) -> None:
    Path(path).write_text(format_matrix(acal), encoding="utf-8")


# ---------------------------------------------------------------- manifests

MANIFEST_KEYS = ("label", "omega", "u0", "acal", "acal_layout", "mu", "mtilde",
                 "k0", "delta", "rho_tau", "rho_x")
_REQUIRED = ("omega", "u0", "acal", "k0", "delta")


@dataclass(frozen=True)
class Manifest:
    path: Path
    values: dict
    lines: dict

    def get(self, key, default=None):
        return self.values.get(key, default)

    def resolve(self, key) -> Path:
        p = Path(self.values[key])
        return p if p.is_absolute() else self.path.parent / p

    def rational(self, key, default=None) -> mpq | None:
        if key not in self.values:
            return default
        return _rational(self.values[key], self.lines[key], self.path)

    def integer(self, key) -> int | None:
        if key not in self.values:
            return None
        text = self.values[key]
        if not text.isdigit():
            raise ParseError(f"{key} must be a non-negative integer", self.lines[key], self.path)
        return int(text)


def parse_manifest(text: str, path) -> Manifest:
    values: dict = {}
    lines: dict = {}
    for i, raw in enumerate(text.splitlines(), 1):
        content = raw.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ParseError("expected 'key = value'", i, path)
        key, value = (s.strip() for s in content.split("=", 1))
        if key not in MANIFEST_KEYS:
            raise ParseError(f"unknown key {key!r}", i, path)
        if key in values:
            raise ParseError(f"duplicate key {key!r}", i, path)
        values[key] = value
        lines[key] = i
    for key in _REQUIRED:
        if key not in values:
            raise ParseError(f"missing key {key!r}", None, path)
    return Manifest(Path(path), values, lines)


def read_manifest(path) -> Manifest:
    path = Path(path)
    return parse_manifest(path.read_text(encoding="utf-8"), path)


def format_manifest(fields: dict) -> str:
    out = []
    for key in MANIFEST_KEYS:
        if key in fields and fields[key] is not None:
            v = fields[key]
            out.append(f"{key} = {format_rational(v) if isinstance(v, type(mpq())) else v}")
    return "\n".join(out) + "\n"
