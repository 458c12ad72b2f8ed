"""Expression AST, recursive-descent parser and printer for potential formulas.

Grammar (EBNF)::

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = ("-" | "+") unary | power ;
    power   = atom [ "^" unary ] ;          (* right associative *)
    atom    = number | "pi" | variable | func "(" expr ")" | "(" expr ")" ;
    variable = "x1" | "x2" | "x3" | "r" | "t" ;
    func    = "sin" | "cos" | "exp" | "sqrt" | "abs" | "log" ;
    number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ]
            | "." digits [ exponent ] ;

So ``-x^2`` is ``-(x^2)``, ``2^-x`` is ``2^(-x)`` and ``a^b^c`` is ``a^(b^c)``.
"""

import math
import re
from dataclasses import dataclass

from ..errors import ParseError

VARIABLES = ("x1", "x2", "x3", "r", "t")
FUNCTIONS = ("sin", "cos", "exp", "sqrt", "abs", "log")
CONSTANTS = ("pi",)


class Expr:
    """Base class of AST nodes. Nodes are immutable and compare structurally."""

    __slots__ = ()

    def __str__(self):
        return to_string(self)

    def variables(self):
        return frozenset(_collect_vars(self))

    def functions(self):
        return frozenset(_collect_funcs(self))


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Const(Expr):
    name: str


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr


def _collect_vars(node):
    if isinstance(node, Var):
        yield node.name
    elif isinstance(node, Neg):
        yield from _collect_vars(node.operand)
    elif isinstance(node, BinOp):
        yield from _collect_vars(node.left)
        yield from _collect_vars(node.right)
    elif isinstance(node, Call):
        yield from _collect_vars(node.arg)


def _collect_funcs(node):
    if isinstance(node, Call):
        yield node.func
        yield from _collect_funcs(node.arg)
    elif isinstance(node, Neg):
        yield from _collect_funcs(node.operand)
    elif isinstance(node, BinOp):
        yield from _collect_funcs(node.left)
        yield from _collect_funcs(node.right)


# --- tokenizer -------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    offset: int


def tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", text, pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


# --- parser ----------------------------------------------------------------


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def error(self, message, tok=None):
        tok = tok or self.tok
        return ParseError(message, self.text, tok.offset)

    def accept(self, text):
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text, context):
        if not self.accept(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r} {context}, found {found!r}")

    def parse(self):
        if self.tok.kind == "end":
            raise self.error("empty expression; expected a number, variable, function or '('")
        node = self.expr()
        if self.tok.kind != "end":
            raise self.error(f"expected operator or end of input, found {self.tok.text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.accept("-"):
            return Neg(self.unary())
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.accept("^"):
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        tok = self.tok
        if tok.kind == "number":
            self.i += 1
            return Num(float(tok.text))
        if tok.kind == "ident":
            self.i += 1
            name = tok.text
            if name in FUNCTIONS:
                self.expect("(", f"after function name {name!r}")
                arg = self.expr()
                self.expect(")", f"to close argument of {name!r}")
                return Call(name, arg)
            if name in CONSTANTS:
                return Const(name)
            if name in VARIABLES:
                return Var(name)
            raise self.error(
                f"unknown identifier {name!r}; expected one of "
                f"{', '.join(VARIABLES + CONSTANTS + FUNCTIONS)}",
                tok,
            )
        if self.accept("("):
            node = self.expr()
            self.expect(")", "to close parenthesis")
            return node
        found = tok.text or "end of input"
        raise self.error(f"expected a number, variable, function or '(', found {found!r}")


def parse(text):
    """Parse ``text`` into an :class:`Expr`; raises :class:`ParseError`."""
    if not isinstance(text, str):
        raise TypeError("expression must be a string")
    return _Parser(text).parse()


# --- printer ---------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}
_NEG_PREC = 3
_POW_PREC = 4
_ATOM_PREC = 5


def _prec(node):
    if isinstance(node, BinOp):
        return _POW_PREC if node.op == "^" else _PREC[node.op]
    if isinstance(node, Neg):
        return _NEG_PREC
    return _ATOM_PREC


def _format_number(value):
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def to_string(node):
    """Render an AST with the minimal parentheses that re-parse to the same tree."""
    if isinstance(node, Num):
        if node.value < 0 or not math.isfinite(node.value):
            raise ValueError(f"cannot print number literal {node.value!r}")
        return _format_number(node.value)
    if isinstance(node, (Var, Const)):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_string(node.arg)})"
    if isinstance(node, Neg):
        inner = to_string(node.operand)
        if _prec(node.operand) < _NEG_PREC:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, BinOp):
        left, right = to_string(node.left), to_string(node.right)
        if node.op == "^":
            if _prec(node.left) < _ATOM_PREC:
                left = f"({left})"
            if _prec(node.right) < _NEG_PREC:
                right = f"({right})"
            return f"{left}^{right}"
        p = _PREC[node.op]
        if _prec(node.left) < p:
            left = f"({left})"
        if _prec(node.right) <= p:
            right = f"({right})"
        return f"{left} {node.op} {right}"
    raise TypeError(f"not an expression node: {node!r}")


# --- code generation -------------------------------------------------------


def to_source(node):
    """Python source for the expression over helper names ``_div``, ``_pow``, ``_sin``, ..."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Const):
        return "_pi"
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_source(node.operand)})"
    if isinstance(node, Call):
        return f"_{node.func}({to_source(node.arg)})"
    if isinstance(node, BinOp):
        left, right = to_source(node.left), to_source(node.right)
        if node.op == "/":
            return f"_div({left}, {right})"
        if node.op == "^":
            return f"_pow({left}, {right})"
        return f"({left} {node.op} {right})"
    raise TypeError(f"not an expression node: {node!r}")


def compile_expr(node, namespace):
    """Compile ``node`` into ``f(x1, x2, x3, r, t)`` bound to a helper namespace."""
    src = f"lambda x1=0.0, x2=0.0, x3=0.0, r=0.0, t=0.0: {to_source(node)}"
    return eval(compile(src, "<potential>", "eval"), dict(namespace))
