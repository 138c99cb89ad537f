"""Recursive-descent parser for the expression mini-language.

    expr   := term (('+'|'-') term)*
    term   := unary (('*'|'/') unary)*
    unary  := ('-'|'+') unary | power
    power  := base ('^' ['-'] integer)*
    base   := number | ident | 'sqrt' '(' expr ')'
            | 'D' '(' ident '(' ident {',' ident} ')' {',' ident} ')'
            | '(' expr ')'
"""
from __future__ import annotations

import re
from fractions import Fraction

from .core import ONE, Expr, const, func, sqrt, var
from .names import IDENT_RE, absorbs_upper, normalize_identifier

__all__ = ["parse", "ParseError"]


class ParseError(ValueError):
    def __init__(self, message: str, text: str, pos: int):
        super().__init__(f"{message} at position {pos}: {text!r}")
        self.pos = pos
        self.text = text


_NUM_RE = re.compile(r"\d+(?:\.\d+)?")
_UPPER_RE = re.compile(r"\^(\d+)")


def _tokenize(text: str):
    toks = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "+-*/^(),":
            toks.append((ch, ch, i))
            i += 1
            continue
        m = _NUM_RE.match(text, i)
        if m:
            toks.append(("num", m.group(), i))
            i = m.end()
            continue
        m = IDENT_RE.match(text, i)
        if m:
            name = m.group()
            j = m.end()
            up = _UPPER_RE.match(text, j)
            if up and absorbs_upper(m.group(1), m.group(2), up.group(1)):
                name += up.group()
                j = up.end()
            toks.append(("id", name, i))
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", text, i)
    toks.append(("end", "", n))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, kind):
        t = self.next()
        if t[0] != kind:
            raise ParseError(f"expected {kind!r}, found {t[1] or 'end of input'!r}", self.text, t[2])
        return t

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        raise ParseError(msg, self.text, tok[2])

    # grammar ----------------------------------------------------------

    def expr(self):
        items = [(1, self.term())]
        while self.peek()[0] in "+-" and self.peek()[0] in ("+", "-"):
            op = self.next()[0]
            items.append((1 if op == "+" else -1, self.term()))
        return ("add", items) if len(items) > 1 else items[0][1]

    def term(self):
        items = [("*", self.unary())]
        while self.peek()[0] in ("*", "/"):
            op = self.next()[0]
            items.append((op, self.unary()))
        return ("mul", items) if len(items) > 1 else items[0][1]

    def unary(self):
        k = self.peek()[0]
        if k == "-":
            self.next()
            return ("neg", self.unary())
        if k == "+":
            self.next()
            return self.unary()
        return self.power()

    def power(self):
        node = self.base()
        while self.peek()[0] == "^":
            self.next()
            sign = 1
            if self.peek()[0] == "-":
                self.next()
                sign = -1
            t = self.next()
            if t[0] != "num" or not t[1].isdigit():
                self.error("exponent must be an integer", t)
            node = ("pow", node, sign * int(t[1]))
        return node

    def base(self):
        t = self.next()
        kind, val, pos = t
        if kind == "num":
            return ("num", Fraction(val))
        if kind == "(":
            inner = self.expr()
            self.expect(")")
            return ("paren", inner)
        if kind == "id":
            if self.peek()[0] == "(":
                if val == "sqrt":
                    self.next()
                    inner = self.expr()
                    self.expect(")")
                    return ("sqrt", inner)
                if val == "D":
                    return self.derivative()
                self.error(f"unknown function {val!r}", t)
            return ("var", val)
        self.error(f"unexpected {val or 'end of input'!r}", t)

    def derivative(self):
        self.expect("(")
        name = self.expect("id")[1]
        self.expect("(")
        args = [self.expect("id")[1]]
        while self.peek()[0] == ",":
            self.next()
            args.append(self.expect("id")[1])
        self.expect(")")
        derivs = []
        while self.peek()[0] == ",":
            self.next()
            d = self.expect("id")
            if d[1] not in args:
                self.error(f"{d[1]!r} is not an argument of {name}", d)
            derivs.append(d[1])
        self.expect(")")
        return ("func", name, tuple(args), tuple(derivs))


def _build(node) -> Expr:
    kind = node[0]
    if kind == "num":
        return const(node[1])
    if kind == "var":
        sign, name = normalize_identifier(node[1])
        return var(name) * sign if sign != 1 else var(name)
    if kind == "func":
        return func(node[1], node[2], node[3])
    if kind == "sqrt":
        return sqrt(_build(node[1]))
    if kind == "paren":
        return _build(node[1])
    if kind == "neg":
        return -_build(node[1])
    if kind == "pow":
        return _build(node[1]) ** node[2]
    if kind == "add":
        out = const(0)
        for sign, sub in node[1]:
            out = out + _build(sub) if sign > 0 else out - _build(sub)
        return out
    if kind == "mul":
        out = ONE
        for op, sub in node[1]:
            out = out * (_build(sub) if op == "*" else _reciprocal(sub))
        return out
    raise AssertionError(kind)


def _reciprocal(node) -> Expr:
    # distribute over products so that a/(b*c^2) means a * b^-1 * c^-2
    kind = node[0]
    if kind == "paren":
        return _reciprocal(node[1])
    if kind == "neg":
        return -_reciprocal(node[1])
    if kind == "mul":
        out = ONE
        for op, sub in node[1]:
            out = out * (_reciprocal(sub) if op == "*" else _build(sub))
        return out
    if kind == "pow":
        return _build(node[1]) ** (-node[2])
    return _build(node).reciprocal()


def parse(text: str) -> Expr:
    """Parse ``text`` into a canonical :class:`Expr`."""
    p = _Parser(text)
    if p.peek()[0] == "end":
        raise ParseError("empty expression", text, 0)
    node = p.expr()
    if p.peek()[0] != "end":
        p.error(f"unexpected {p.peek()[1]!r}")
    return _build(node)
