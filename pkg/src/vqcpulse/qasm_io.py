"""Parser and serializer for the ``.vqc`` circuit text format.

The format is a deliberately small, line-oriented assembly whose one
non-standard feature is the explicit parameter tag ``t[i]``: rotation
angles may be written as an affine function of a single variational
parameter, e.g. ``rz(0.5*t[2] + 1.5707963267948966) q[0];``.

Grammar (case-insensitive keywords, ``#`` starts a comment, statements
end with ``;`` and may share a line):

    header:     qubits <N>;  params <P>;
    gates:      rz(<expr>) q[<i>];   rx(<expr>) q[<i>];   h q[<i>];
                cx q[<i>], q[<j>];   swap q[<i>], q[<j>];
    expr:       FLOAT | FLOAT * t[<k>] [+ FLOAT] | t[<k>] [+ FLOAT]
    FLOAT:      optionally signed decimal or the literal ``pi``

The header must precede all gates and appear exactly once.
"""
from __future__ import annotations

import math
import re

from .circuit import Circuit, Gate, ParamAngle

FILE_EXTENSION = ".vqc"


class ParseError(ValueError):
    """Syntax or range error, located at (line, column), both 1-based."""

    def __init__(self, line: int, column: int, message: str):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
        self.message = message


_TOKEN_RE = re.compile(
    r"""
    (?P<float>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_]+)
  | (?P<punct>[()\[\],;*+-])
  | (?P<ws>\s+)
  | (?P<bad>.)
    """,
    re.VERBOSE,
)


def _tokenize(text: str):
    """Yield (kind, value, line, col) tokens; total over arbitrary input."""
    tokens = []
    lineno = 1
    for lineno, line in enumerate(text.splitlines(), start=1):
        hash_pos = line.find("#")
        if hash_pos >= 0:
            line = line[:hash_pos]
        for m in _TOKEN_RE.finditer(line):
            kind = m.lastgroup
            if kind == "ws":
                continue
            if kind == "bad":
                raise ParseError(lineno, m.start() + 1, f"unexpected character {m.group()!r}")
            tokens.append((kind, m.group(), lineno, m.start() + 1))
    tokens.append(("eof", "", lineno + 1, 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        if tok[0] != "eof":
            self.pos += 1
        return tok

    def error(self, message: str) -> ParseError:
        _, _, line, col = self.peek()
        return ParseError(line, col, message)

    def expect_punct(self, char: str):
        kind, value, line, col = self.next()
        if kind != "punct" or value != char:
            raise ParseError(line, col, f"expected {char!r}, found {value or 'end of input'!r}")

    def expect_int(self, what: str) -> int:
        kind, value, line, col = self.next()
        if kind != "float" or not re.fullmatch(r"\d+", value):
            raise ParseError(line, col, f"expected {what}, found {value or 'end of input'!r}")
        return int(value)

    def accept_punct(self, char: str) -> bool:
        kind, value, _, _ = self.peek()
        if kind == "punct" and value == char:
            self.next()
            return True
        return False

    def parse_float(self, what: str = "number") -> float:
        sign = 1.0
        if self.accept_punct("-"):
            sign = -1.0
        elif self.accept_punct("+"):
            pass
        kind, value, line, col = self.next()
        if kind == "float":
            return sign * float(value)
        if kind == "name" and value.lower() == "pi":
            return sign * math.pi
        raise ParseError(line, col, f"expected {what}, found {value or 'end of input'!r}")

    def parse_index(self, prefix: str, what: str) -> int:
        kind, value, line, col = self.next()
        if kind != "name" or value.lower() != prefix:
            raise ParseError(line, col, f"expected {what}, found {value or 'end of input'!r}")
        self.expect_punct("[")
        idx = self.expect_int(f"{what} index")
        self.expect_punct("]")
        return idx

    def parse_expr(self) -> ParamAngle:
        """expr := FLOAT | FLOAT '*' t[k] ['+' FLOAT] | t[k] ['+' FLOAT]"""
        kind, value, _, _ = self.peek()
        if kind == "name" and value.lower() == "t":
            idx = self.parse_index("t", "parameter reference")
            coeff = 1.0
        else:
            first = self.parse_float("angle expression")
            if self.accept_punct("*"):
                idx = self.parse_index("t", "parameter reference")
                coeff = first
            else:
                return ParamAngle.constant(first)
        offset = self.parse_float("offset") if self.accept_punct("+") else 0.0
        if coeff == 0.0:
            # ParamAngle.affine would silently fold this to a constant;
            # round-tripping demands the text never encodes it.
            raise self.error("zero coefficient on parameter term")
        return ParamAngle.affine(idx, coeff, offset)


def parse(text: str) -> Circuit:
    """Parse ``.vqc`` text into a Circuit; raises ParseError with location."""
    p = _Parser(text)
    n_qubits: int | None = None
    n_params: int | None = None
    gates: list[Gate] = []

    def check_qubit(idx: int, line: int, col: int) -> int:
        if idx >= n_qubits:
            raise ParseError(line, col, f"qubit index {idx} out of range (qubits {n_qubits})")
        return idx

    while True:
        kind, value, line, col = p.peek()
        if kind == "eof":
            break
        if kind != "name":
            raise ParseError(line, col, f"expected a statement, found {value!r}")
        keyword = value.lower()
        p.next()
        if keyword in ("qubits", "params"):
            count = p.expect_int(f"{keyword} count")
            p.expect_punct(";")
            if keyword == "qubits":
                if n_qubits is not None:
                    raise ParseError(line, col, "duplicate header: qubits")
                n_qubits = count
            else:
                if n_params is not None:
                    raise ParseError(line, col, "duplicate header: params")
                n_params = count
            continue
        if n_qubits is None or n_params is None:
            raise ParseError(line, col, "header (qubits/params) must precede gates")
        if keyword in ("rz", "rx"):
            p.expect_punct("(")
            angle = p.parse_expr()
            if angle.param_index is not None and angle.param_index >= n_params:
                raise ParseError(
                    line, col, f"param index {angle.param_index} out of range (params {n_params})"
                )
            p.expect_punct(")")
            q = check_qubit(p.parse_index("q", "qubit reference"), line, col)
            p.expect_punct(";")
            gates.append(Gate(keyword, (q,), angle))
        elif keyword == "h":
            q = check_qubit(p.parse_index("q", "qubit reference"), line, col)
            p.expect_punct(";")
            gates.append(Gate("h", (q,)))
        elif keyword in ("cx", "swap"):
            a = check_qubit(p.parse_index("q", "qubit reference"), line, col)
            p.expect_punct(",")
            b = check_qubit(p.parse_index("q", "qubit reference"), line, col)
            p.expect_punct(";")
            if a == b:
                raise ParseError(line, col, f"{keyword} qubits must be distinct")
            gates.append(Gate(keyword, (a, b)))
        else:
            raise ParseError(line, col, f"unknown statement {value!r}")

    if n_qubits is None or n_params is None:
        raise ParseError(p.tokens[-1][2], 1, "missing header (qubits/params)")
    return Circuit(n_qubits, n_params, tuple(gates))


def _fmt(x: float) -> str:
    """17 significant digits: enough to round-trip any float64 exactly."""
    return format(x, ".17g")


def _fmt_angle(angle: ParamAngle) -> str:
    if angle.param_index is None:
        return _fmt(angle.offset)
    term = f"t[{angle.param_index}]"
    if angle.coefficient != 1.0:
        term = f"{_fmt(angle.coefficient)}*{term}"
    if angle.offset != 0.0:
        term = f"{term} + {_fmt(angle.offset)}"
    return term


def serialize(circuit: Circuit) -> str:
    """Render a Circuit as ``.vqc`` text; parse(serialize(c)) == c."""
    lines = [f"qubits {circuit.n_qubits}; params {circuit.n_params};"]
    for g in circuit.gates:
        if g.kind in ("rz", "rx"):
            lines.append(f"{g.kind}({_fmt_angle(g.angle)}) q[{g.qubits[0]}];")
        elif g.kind == "h":
            lines.append(f"h q[{g.qubits[0]}];")
        else:
            lines.append(f"{g.kind} q[{g.qubits[0]}], q[{g.qubits[1]}];")
    return "\n".join(lines) + "\n"


def load(path) -> Circuit:
    with open(path, "r", encoding="utf-8") as f:
        return parse(f.read())


def save(circuit: Circuit, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(serialize(circuit))
