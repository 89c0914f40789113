"""Text formats: manifold files (.crm) and map files (.map).

A manifold file::

    # Lewy hypersurface
    manifold lewy in C^2
    vars z, w
    weights 1, 2
    point 0, 0
    eq Im(w) = |z|^2

Expressions use +, -, *, /, ^ (nonnegative integer exponents), parentheses,
rational or decimal literals, the unit ``i``, conj(.), Re(.), Im(.), |.|^2k,
and in map files also exp(.) and sqrt(.).  A map file holds optional
``map <name>`` and ``point ...`` lines followed by one component per line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .exactalg import I, GaussianRational, WeightVector, format_scalar, gr
from .geometry import ManifoldSpec, PointQ, conj_name, validate
from .mapcheck import Expr, Fn, MapSpec, Num, Var, exp, power, sqrt


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.message = message
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line else (f"column {column}: " if column else "")
        super().__init__(where + message)

    def to_json(self) -> dict:
        return {"error": "parse", "message": self.message, "line": self.line, "column": self.column}


_TOKEN = re.compile(r"\s*(?:(?P<num>\d+(?:\.\d+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^()|,=]))")


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    column: int


def tokenize(text: str, line: int = 0, offset: int = 0) -> list[Token]:
    out = []
    pos = 0
    while pos < len(text):
        if not text[pos:].strip():
            break
        m = _TOKEN.match(text, pos)
        if not m:
            col = pos + len(text[pos:]) - len(text[pos:].lstrip()) + 1
            raise ParseError(f"unexpected character {text[col - 1]!r}", line, col + offset)
        kind = m.lastgroup
        out.append(Token(kind, m.group(kind), m.start(kind) + 1 + offset))
        pos = m.end()
    out.append(Token("end", "", len(text) + 1 + offset))
    return out


class ExprParser:
    """Recursive descent over one line of tokens.

    ``allowed`` are the variable names that may appear; ``swap`` pairs each
    coordinate with its conjugate name.  ``functions`` limits the callable
    names beyond conj/Re/Im.
    """

    def __init__(self, tokens, allowed, swap, functions=(), line=0):
        self.toks = tokens
        self.i = 0
        self.allowed = set(allowed)
        self.swap = swap
        self.functions = set(functions)
        self.line = line

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        return ParseError(msg, self.line, tok.column)

    def expect(self, text):
        if self.tok.text != text or self.tok.kind == "end":
            got = "end of line" if self.tok.kind == "end" else repr(self.tok.text)
            raise self.error(f"expected {text!r}, got {got}")
        self.i += 1

    def at_end(self) -> bool:
        return self.tok.kind == "end"

    def parse(self) -> Expr:
        e = self.expr()
        if not self.at_end():
            raise self.error(f"unexpected {self.tok.text!r}")
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self.tok.text
            self.i += 1
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.tok.text in ("*", "/") and self.tok.kind == "op":
            op = self.tok
            self.i += 1
            rhs = self.unary()
            if op.text == "*":
                e = e * rhs
            else:
                try:
                    e = e / rhs
                except ZeroDivisionError:
                    raise self.error("division by zero", op) from None
        return e

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text in ("-", "+"):
            op = self.tok.text
            self.i += 1
            e = self.unary()
            return -e if op == "-" else e
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.i += 1
            if self.tok.kind != "num" or "." in self.tok.text:
                raise self.error("exponent must be a nonnegative integer")
            k = int(self.tok.text)
            self.i += 1
            return power(base, k)
        return base

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Num(gr(Fraction(t.text)))
        if t.kind == "name":
            self.i += 1
            if self.tok.text == "(" and self.tok.kind == "op":
                return self.call(t)
            if t.text == "i":
                return Num(I)
            if t.text not in self.allowed:
                raise self.error(f"unknown variable {t.text!r}", t)
            return Var(t.text)
        if t.text == "(":
            self.i += 1
            e = self.expr()
            self.expect(")")
            return e
        if t.text == "|":
            self.i += 1
            e = self.expr()
            self.expect("|")
            nxt = self.toks[min(self.i + 1, len(self.toks) - 1)]
            if not (self.tok.text == "^" and nxt.kind == "num" and nxt.text.isdigit() and int(nxt.text) % 2 == 0 and int(nxt.text)):
                raise self.error("modulus needs an even power: write |x|^2")
            self.i += 2
            return power(e * self.conj(e, t), int(nxt.text) // 2)
        if t.kind == "end":
            raise self.error("unexpected end of line")
        raise self.error(f"unexpected {t.text!r}")

    def conj(self, e: Expr, at: Token) -> Expr:
        if not self.swap:
            raise self.error("conjugation is not allowed here", at)
        return e.bar(self.swap)

    def call(self, name: Token) -> Expr:
        self.expect("(")
        arg = self.expr()
        self.expect(")")
        f = name.text
        if f == "conj":
            return self.conj(arg, name)
        if f == "Re":
            return (arg + self.conj(arg, name)) / 2
        if f == "Im":
            return (arg - self.conj(arg, name)) / Num(2 * I)
        if f in self.functions:
            return exp(arg) if f == "exp" else sqrt(arg)
        raise self.error(f"unknown function {f!r}", name)


def parse_expr(text: str, allowed, swap=None, functions=(), line=0, offset=0) -> Expr:
    return ExprParser(tokenize(text, line, offset), allowed, swap or {}, functions, line).parse()


def _conj_swap(coords) -> dict:
    swap = {}
    for v in coords:
        swap[v] = conj_name(v)
        swap[conj_name(v)] = v
    return swap


def _split(body: str, line: int, offset: int) -> list[tuple[str, int]]:
    """Comma separated pieces with their column offsets (commas inside parentheses kept)."""
    out = []
    depth = 0
    start = 0
    for k, ch in enumerate(body):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            out.append((body[start:k], offset + start))
            start = k + 1
    out.append((body[start:], offset + start))
    for piece, col in out:
        if not piece.strip():
            raise ParseError("empty entry in list", line, col + 1)
    return out


def _constant(text: str, line: int, offset: int) -> GaussianRational:
    e = parse_expr(text, (), None, (), line, offset)
    if not isinstance(e, Num):
        raise ParseError("expected a constant", line, offset + 1)
    return e.value


def _lines(text: str):
    for k, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].rstrip()
        if body.strip():
            yield k, body


def _keyword(body: str) -> tuple[str, str, int]:
    stripped = body.lstrip()
    lead = len(body) - len(stripped)
    word, _, rest = stripped.partition(" ")
    return word, rest, lead + len(word) + 1


_HEADER = re.compile(r"\s*manifold\s+([A-Za-z_][A-Za-z0-9_]*)\s+in\s+C\^(\d+)\s*$")


def parse_manifold(text: str, check: bool = True) -> ManifoldSpec:
    """ManifoldSpec from DSL text; ``eq L = R`` contributes rho = L - R."""
    name = None
    N = None
    coords = None
    weights = None
    point = None
    eqs = []
    for line, body in _lines(text):
        word, rest, off = _keyword(body)
        if word == "manifold":
            if name is not None:
                raise ParseError("duplicate manifold header", line, 1)
            m = _HEADER.match(body)
            if not m:
                raise ParseError("header must read: manifold <name> in C^<N>", line, off)
            name, N = m.group(1), int(m.group(2))
            continue
        if name is None:
            raise ParseError("file must start with a manifold header", line, 1)
        if word == "vars":
            if coords is not None:
                raise ParseError("duplicate vars line", line, 1)
            names = []
            for piece, col in _split(rest, line, off):
                v = piece.strip()
                if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", v) or v == "i" or v in ("conj", "Re", "Im", "exp", "sqrt"):
                    raise ParseError(f"invalid variable name {v!r}", line, col + 1)
                if v in names:
                    raise ParseError(f"duplicate variable {v!r}", line, col + 1)
                names.append(v)
            if len(names) != N:
                raise ParseError(f"C^{N} needs {N} variables, got {len(names)}", line, off)
            coords = tuple(names)
        elif word == "weights":
            ws = []
            for piece, col in _split(rest, line, off):
                if not piece.strip().isdigit() or int(piece) < 1:
                    raise ParseError("weights must be positive integers", line, col + 1)
                ws.append(int(piece))
            if len(ws) != N:
                raise ParseError(f"expected {N} weights, got {len(ws)}", line, off)
            weights = ws
        elif word == "point":
            vals = [_constant(piece, line, col) for piece, col in _split(rest, line, off)]
            if len(vals) != N:
                raise ParseError(f"expected {N} point coordinates, got {len(vals)}", line, off)
            point = PointQ(tuple(vals))
        elif word == "eq":
            if coords is None:
                raise ParseError("vars must come before equations", line, 1)
            if rest.count("=") != 1:
                raise ParseError("equation needs exactly one '='", line, off + max(rest.find("="), len(rest)) + 1)
            lhs, rhs = rest.split("=")
            swap = _conj_swap(coords)
            allowed = coords + tuple(conj_name(v) for v in coords)
            L = parse_expr(lhs, allowed, swap, (), line, off)
            R = parse_expr(rhs, allowed, swap, (), line, off + len(lhs) + 1)
            e = L - R
            if not e.is_polynomial():
                raise ParseError("equations must be polynomial", line, off + 1)
            rho = e.to_poly(allowed)
            if rho.is_zero():
                raise ParseError("equation is trivially satisfied", line, off + 1)
            eqs.append(rho)
        else:
            raise ParseError(f"unknown keyword {word!r}", line, len(body) - len(body.lstrip()) + 1)
    if name is None:
        raise ParseError("missing manifold header")
    if coords is None:
        raise ParseError("missing vars line")
    if not eqs:
        raise ParseError("no equations")
    spec = ManifoldSpec(N, tuple(eqs), coords, WeightVector(tuple(weights), coords) if weights else None, point, name)
    if check:
        validate(spec)
    return spec


def print_manifold(spec: ManifoldSpec) -> str:
    lines = [f"manifold {spec.name or 'M'} in C^{spec.N}", "vars " + ", ".join(spec.coords)]
    if spec.weights is not None:
        lines.append("weights " + ", ".join(str(w) for w in spec.weights.weights))
    if spec.basepoint is not None:
        lines.append("point " + ", ".join(format_scalar(c) for c in spec.basepoint.coords))
    for r in spec.rho:
        lines.append(f"eq {r} = 0")
    return "\n".join(lines) + "\n"


def parse_map(text: str, spec: ManifoldSpec) -> MapSpec:
    """Holomorphic map from the coordinates of ``spec`` to the same C^N."""
    name = ""
    point = None
    comps = []
    for line, body in _lines(text):
        word, rest, off = _keyword(body)
        if word == "map" and not comps:
            name = rest.strip()
            continue
        if word == "point" and not comps:
            vals = [_constant(piece, line, col) for piece, col in _split(rest, line, off)]
            if len(vals) != spec.N:
                raise ParseError(f"expected {spec.N} point coordinates, got {len(vals)}", line, off)
            point = PointQ(tuple(vals))
            continue
        comps.append(parse_expr(body, spec.coords, None, ("exp", "sqrt"), line))
    if len(comps) != spec.N:
        raise ParseError(f"map needs {spec.N} components, got {len(comps)}")
    return MapSpec(spec.coords, tuple(comps), point or spec.basepoint, spec.coords, name, any(_has_exp(c) for c in comps))


def _has_exp(e: Expr) -> bool:
    """exp of a nonconstant argument somewhere in e."""
    if isinstance(e, Fn) and e.name == "exp" and e.arg.used_vars():
        return True
    return any(_has_exp(x) for x in e.children())


def print_map(H: MapSpec) -> str:
    lines = []
    if H.name:
        lines.append(f"map {H.name}")
    if H.basepoint is not None:
        lines.append("point " + ", ".join(format_scalar(c) for c in H.basepoint.coords))
    lines += [str(c) for c in H.components]
    return "\n".join(lines) + "\n"


def parse_point(text: str, N: int) -> PointQ:
    vals = [_constant(piece, 0, col) for piece, col in _split(text, 0, 0)]
    if len(vals) != N:
        raise ParseError(f"expected {N} point coordinates, got {len(vals)}")
    return PointQ(tuple(vals))


def parse_leaf(text: str, coords) -> tuple[list[Expr], list[GaussianRational]]:
    """``h1 = c1; h2 = c2`` with holomorphic polynomial h and constant c."""
    hs, cs = [], []
    for piece in text.split(";"):
        if piece.count("=") != 1:
            raise ParseError(f"leaf condition needs one '=': {piece.strip()!r}")
        lhs, rhs = piece.split("=")
        hs.append(parse_expr(lhs, coords))
        cs.append(_constant(rhs, 0, len(lhs) + 1))
    return hs, cs

