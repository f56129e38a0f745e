"""Sparse multivariate polynomial arithmetic over prime fields F_p.

Monomials are exponent tuples; polynomials are immutable term lists kept
sorted strictly descending in the ring's term order. All coefficient
arithmetic is machine-integer arithmetic mod p. Values never mutate after
construction, so they are safe to share between threads.
"""

from __future__ import annotations

import re
from typing import Iterable

EXPONENT_CAP = 2**31 - 1
MODULUS_CAP = 2**16

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

_prime_cache: dict[int, bool] = {}


def is_prime(n: int) -> bool:
    cached = _prime_cache.get(n)
    if cached is not None:
        return cached
    ok = n >= 2
    d = 2
    while ok and d * d <= n:
        if n % d == 0:
            ok = False
        d += 1
    _prime_cache[n] = ok
    return ok


class PrimeFieldElement:
    """An element of F_p, stored reduced into [0, p)."""

    __slots__ = ("value", "modulus")

    def __init__(self, value: int, modulus: int):
        if not is_prime(modulus) or modulus > MODULUS_CAP:
            raise ValueError(f"modulus must be a prime <= {MODULUS_CAP}, got {modulus}")
        self.value = value % modulus
        self.modulus = modulus

    def _coerce(self, other) -> "PrimeFieldElement":
        if isinstance(other, PrimeFieldElement):
            if other.modulus != self.modulus:
                raise ValueError("mixed moduli")
            return other
        if isinstance(other, int):
            return PrimeFieldElement(other, self.modulus)
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return PrimeFieldElement(self.value + o.value, self.modulus)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return PrimeFieldElement(self.value - o.value, self.modulus)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return PrimeFieldElement(o.value - self.value, self.modulus)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return PrimeFieldElement(self.value * o.value, self.modulus)

    __rmul__ = __mul__

    def __neg__(self):
        return PrimeFieldElement(-self.value, self.modulus)

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        return PrimeFieldElement(pow(self.value, k, self.modulus), self.modulus)

    def inverse(self) -> "PrimeFieldElement":
        if self.value == 0:
            raise ZeroDivisionError("inverse of zero in F_p")
        return PrimeFieldElement(pow(self.value, self.modulus - 2, self.modulus), self.modulus)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self * o.inverse()

    def __eq__(self, other):
        if isinstance(other, PrimeFieldElement):
            return self.value == other.value and self.modulus == other.modulus
        if isinstance(other, int):
            return self.value == other % self.modulus
        return NotImplemented

    def __hash__(self):
        return hash((self.value, self.modulus))

    def __repr__(self):
        return f"PrimeFieldElement({self.value}, {self.modulus})"

    def __str__(self):
        return str(self.value)


class Monomial:
    """A monomial x^a, held as the exponent vector a."""

    __slots__ = ("exponents",)

    def __init__(self, exponents: Iterable[int]):
        exps = tuple(int(e) for e in exponents)
        if any(e < 0 for e in exps):
            raise ValueError("negative exponent")
        if any(e > EXPONENT_CAP for e in exps):
            raise OverflowError("exponent overflow")
        self.exponents = exps

    def degree(self) -> int:
        return sum(self.exponents)

    def __mul__(self, other: "Monomial") -> "Monomial":
        return Monomial(mul_exps(self.exponents, other.exponents))

    def divides(self, other: "Monomial") -> bool:
        return all(a <= b for a, b in zip(self.exponents, other.exponents))

    def __eq__(self, other):
        return isinstance(other, Monomial) and self.exponents == other.exponents

    def __hash__(self):
        return hash(self.exponents)

    def __repr__(self):
        return f"Monomial({self.exponents})"


def qsplit(m: Monomial, q: int) -> tuple[Monomial, Monomial]:
    """Componentwise division with remainder: m == q*(m // q) + (m % q)."""
    if q < 1:
        raise ValueError("q must be >= 1")
    quo, rem = qsplit_exps(m.exponents, q)
    return Monomial(quo), Monomial(rem)


def qsplit_exps(exps: tuple[int, ...], q: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    return tuple(e // q for e in exps), tuple(e % q for e in exps)


def mul_exps(a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]:
    out = tuple(x + y for x, y in zip(a, b))
    for e in out:
        if e > EXPONENT_CAP:
            raise OverflowError("exponent overflow")
    return out


class TermOrder:
    """A monomial order. Kinds: grevlex, lex, block(k).

    block(k) compares the first k variables lexicographically before
    falling back to grevlex on the remaining ones; it eliminates the
    first k variables.
    """

    __slots__ = ("kind", "block_size")

    def __init__(self, kind: str, block_size: int = 0):
        if kind not in ("grevlex", "lex", "block"):
            raise ValueError(f"unknown term order kind {kind!r}")
        if kind == "block" and block_size < 1:
            raise ValueError("block order needs a positive block size")
        self.kind = kind
        self.block_size = block_size if kind == "block" else 0

    @staticmethod
    def grevlex() -> "TermOrder":
        return _GREVLEX

    @staticmethod
    def lex() -> "TermOrder":
        return _LEX

    @staticmethod
    def block(k: int) -> "TermOrder":
        return TermOrder("block", k)

    def key(self, exps: tuple[int, ...]):
        if self.kind == "grevlex":
            return (sum(exps), tuple(-e for e in reversed(exps)))
        if self.kind == "lex":
            return exps
        k = self.block_size
        head, tail = exps[:k], exps[k:]
        return (head, sum(tail), tuple(-e for e in reversed(tail)))

    def __eq__(self, other):
        return (
            isinstance(other, TermOrder)
            and self.kind == other.kind
            and self.block_size == other.block_size
        )

    def __hash__(self):
        return hash((self.kind, self.block_size))

    def __repr__(self):
        if self.kind == "block":
            return f"TermOrder('block', {self.block_size})"
        return f"TermOrder({self.kind!r})"


_GREVLEX = TermOrder("grevlex")
_LEX = TermOrder("lex")


class PolyRing:
    """Signature of F_p[x_1..x_n] with a fixed term order."""

    __slots__ = ("p", "names", "order", "n", "key", "_zero", "_one", "_vars")

    def __init__(self, p: int, names: Iterable[str], order: TermOrder | None = None):
        if not is_prime(p) or p > MODULUS_CAP:
            raise ValueError(f"characteristic must be a prime <= {MODULUS_CAP}, got {p}")
        names = tuple(names)
        if len(set(names)) != len(names):
            raise ValueError("duplicate variable names")
        for nm in names:
            if not _IDENT_RE.match(nm):
                raise ValueError(f"bad variable name {nm!r}")
        self.p = p
        self.names = names
        self.n = len(names)
        self.order = order or _GREVLEX
        self.key = self.order.key
        self._zero = Polynomial(self, ())
        self._one = Polynomial(self, (((0,) * self.n, 1),)) if p > 1 else self._zero
        self._vars = None

    def zero(self) -> "Polynomial":
        return self._zero

    def one(self) -> "Polynomial":
        return self._one

    def const(self, c: int) -> "Polynomial":
        c %= self.p
        if c == 0:
            return self._zero
        return Polynomial(self, (((0,) * self.n, c),))

    def var(self, name: str) -> "Polynomial":
        i = self.names.index(name)
        exps = tuple(1 if j == i else 0 for j in range(self.n))
        return Polynomial(self, ((exps, 1),))

    def gens(self) -> tuple["Polynomial", ...]:
        if self._vars is None:
            self._vars = tuple(self.var(nm) for nm in self.names)
        return self._vars

    def from_dict(self, d: dict[tuple[int, ...], int]) -> "Polynomial":
        items = [(e, c % self.p) for e, c in d.items() if c % self.p]
        items.sort(key=lambda t: self.key(t[0]), reverse=True)
        return Polynomial(self, tuple(items))

    def monomial(self, exps: Iterable[int], coeff: int = 1) -> "Polynomial":
        return self.from_dict({tuple(exps): coeff})

    def with_order(self, order: TermOrder) -> "PolyRing":
        return PolyRing(self.p, self.names, order)

    def __eq__(self, other):
        return (
            isinstance(other, PolyRing)
            and self.p == other.p
            and self.names == other.names
            and self.order == other.order
        )

    def __hash__(self):
        return hash((self.p, self.names, self.order))

    def __repr__(self):
        return f"PolyRing(p={self.p}, names={self.names}, order={self.order!r})"


class Polynomial:
    """Immutable sparse polynomial: terms sorted strictly descending."""

    __slots__ = ("ring", "terms")

    def __init__(self, ring: PolyRing, terms: tuple[tuple[tuple[int, ...], int], ...]):
        self.ring = ring
        self.terms = terms

    # -- basic queries ---------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return not self.terms or not any(self.terms[0][0])

    def constant_value(self) -> int:
        """The coefficient of x^0 when the polynomial IS a constant."""
        if not self.terms:
            return 0
        if len(self.terms) == 1 and not any(self.terms[0][0]):
            return self.terms[0][1]
        raise ValueError("not a constant polynomial")

    def lt(self) -> tuple[tuple[int, ...], int]:
        if not self.terms:
            raise ValueError("zero polynomial has no leading term")
        return self.terms[0]

    def lm(self) -> tuple[int, ...]:
        return self.lt()[0]

    def lc(self) -> int:
        return self.lt()[1]

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        if not self.terms:
            return -1
        return max(sum(e) for e, _ in self.terms)

    def variables(self) -> set[str]:
        used = set()
        for e, _ in self.terms:
            for i, k in enumerate(e):
                if k:
                    used.add(self.ring.names[i])
        return used

    # -- arithmetic ------------------------------------------------------

    def _check(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.ring != self.ring:
                raise ValueError("mismatched rings")
            return other
        if isinstance(other, int):
            return self.ring.const(other)
        if isinstance(other, PrimeFieldElement):
            if other.modulus != self.ring.p:
                raise ValueError("mismatched rings")
            return self.ring.const(other.value)
        return NotImplemented

    def __add__(self, other):
        o = self._check(other)
        if o is NotImplemented:
            return o
        d = dict(self.terms)
        p = self.ring.p
        for e, c in o.terms:
            nc = (d.get(e, 0) + c) % p
            if nc:
                d[e] = nc
            else:
                d.pop(e, None)
        return self.ring.from_dict(d)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._check(other)
        if o is NotImplemented:
            return o
        d = dict(self.terms)
        p = self.ring.p
        for e, c in o.terms:
            nc = (d.get(e, 0) - c) % p
            if nc:
                d[e] = nc
            else:
                d.pop(e, None)
        return self.ring.from_dict(d)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        p = self.ring.p
        return Polynomial(self.ring, tuple((e, (-c) % p) for e, c in self.terms))

    def __mul__(self, other):
        if isinstance(other, int) or isinstance(other, PrimeFieldElement):
            c = other.value if isinstance(other, PrimeFieldElement) else other
            c %= self.ring.p
            if c == 0:
                return self.ring.zero()
            if c == 1:
                return self
            p = self.ring.p
            return Polynomial(self.ring, tuple((e, (k * c) % p) for e, k in self.terms))
        o = self._check(other)
        if o is NotImplemented:
            return o
        if not self.terms or not o.terms:
            return self.ring.zero()
        d: dict[tuple[int, ...], int] = {}
        p = self.ring.p
        for ea, ca in self.terms:
            for eb, cb in o.terms:
                e = mul_exps(ea, eb)
                d[e] = (d.get(e, 0) + ca * cb) % p
        return self.ring.from_dict(d)

    __rmul__ = __mul__

    def scale(self, c: int) -> "Polynomial":
        return self * c

    def monic(self) -> "Polynomial":
        if not self.terms:
            return self
        c = self.lc()
        if c == 1:
            return self
        inv = pow(c, self.ring.p - 2, self.ring.p)
        return self * inv

    def __pow__(self, k: int) -> "Polynomial":
        if k < 0:
            raise ValueError("negative power")
        result = self.ring.one()
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base if k > 1 else base
            k >>= 1
        return result

    # -- structural operations --------------------------------------------

    def cast(self, ring: PolyRing) -> "Polynomial":
        """Re-express in another ring by matching variable names.

        Every variable actually used must exist in the target ring.
        """
        if ring == self.ring:
            return self
        if ring.p != self.ring.p:
            raise ValueError("mismatched characteristic")
        pos = []
        for i, nm in enumerate(self.ring.names):
            pos.append(ring.names.index(nm) if nm in ring.names else -1)
        d: dict[tuple[int, ...], int] = {}
        for e, c in self.terms:
            out = [0] * ring.n
            for i, k in enumerate(e):
                if k:
                    if pos[i] < 0:
                        raise ValueError(
                            f"variable {self.ring.names[i]!r} not present in target ring"
                        )
                    out[pos[i]] = k
            te = tuple(out)
            d[te] = (d.get(te, 0) + c) % ring.p
        return ring.from_dict(d)

    def substitute(self, mapping: dict[str, "Polynomial"], ring: PolyRing | None = None) -> "Polynomial":
        """Substitute polynomials for variables; unmapped variables persist."""
        target = ring or (next(iter(mapping.values())).ring if mapping else self.ring)
        images = []
        for i, nm in enumerate(self.ring.names):
            if nm in mapping:
                img = mapping[nm]
                images.append(img if img.ring == target else img.cast(target))
            else:
                images.append(None)
        power_cache: dict[tuple[int, int], Polynomial] = {}
        acc = target.zero()
        for e, c in self.terms:
            term = target.const(c)
            for i, k in enumerate(e):
                if not k:
                    continue
                img = images[i]
                if img is None:
                    term = term * target.var(self.ring.names[i])
                else:
                    key = (i, k)
                    pw = power_cache.get(key)
                    if pw is None:
                        pw = img ** k
                        power_cache[key] = pw
                    term = term * pw
            acc = acc + term
        return acc

    def deriv(self, var: str) -> "Polynomial":
        """Formal partial derivative, coefficients reduced mod p."""
        i = self.ring.names.index(var)
        p = self.ring.p
        d: dict[tuple[int, ...], int] = {}
        for e, c in self.terms:
            k = e[i]
            if k == 0:
                continue
            nc = (c * k) % p
            if nc:
                ne = e[:i] + (k - 1,) + e[i + 1:]
                d[ne] = (d.get(ne, 0) + nc) % p
        return self.ring.from_dict(d)

    def typed_terms(self) -> tuple[tuple[Monomial, PrimeFieldElement], ...]:
        p = self.ring.p
        return tuple((Monomial(e), PrimeFieldElement(c, p)) for e, c in self.terms)

    # -- comparison / formatting ------------------------------------------

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.ring == other.ring and self.terms == other.terms
        if isinstance(other, int):
            o = other % self.ring.p
            if o == 0:
                return not self.terms
            return self.terms == (((0,) * self.ring.n, o),)
        return NotImplemented

    def __hash__(self):
        return hash((self.ring.p, self.ring.names, self.terms))

    def __str__(self):
        if not self.terms:
            return "0"
        names = self.ring.names
        parts = []
        for e, c in self.terms:
            factors = []
            if c != 1 or not any(e):
                factors.append(str(c))
            for nm, k in zip(names, e):
                if k == 1:
                    factors.append(nm)
                elif k > 1:
                    factors.append(f"{nm}^{k}")
            parts.append("*".join(factors))
        return "+".join(parts)

    def __repr__(self):
        return f"<poly {self} over F_{self.ring.p}[{','.join(self.ring.names)}]>"


# -- parser ----------------------------------------------------------------

class ParseError(ValueError):
    """Syntax or semantic error in a polynomial expression."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


_TOKEN_RE = re.compile(r"(\d+)|([A-Za-z_][A-Za-z0-9_]*)|([-+*^()])")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        if m.group(1):
            tokens.append(("int", m.group(1), pos))
        elif m.group(2):
            tokens.append(("name", m.group(2), pos))
        else:
            tokens.append(("op", m.group(3), pos))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    """Recursive descent: ^ binds tightest, then *, then +/-.

    Juxtaposition is not multiplication; adjacent atoms are an error.
    """

    def __init__(self, text: str, ring: PolyRing):
        self.tokens = _tokenize(text)
        self.i = 0
        self.ring = ring

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def parse(self) -> Polynomial:
        value = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            if kind in ("int", "name") or text == "(":
                raise ParseError(
                    "juxtaposition is not multiplication; use '*'", pos
                )
            raise ParseError(f"unexpected {text!r}", pos)
        return value

    def expr(self) -> Polynomial:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            value = -self.term()
        else:
            value = self.term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                rhs = self.term()
                value = value + rhs if text == "+" else value - rhs
            else:
                return value

    def term(self) -> Polynomial:
        value = self.factor()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text == "*":
                self.advance()
                value = value * self.factor()
            else:
                return value

    def factor(self) -> Polynomial:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return -self.factor()
        return self.power()

    def power(self) -> Polynomial:
        base = self.atom()
        kind, text, pos = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            kind, text, pos = self.advance()
            if kind != "int":
                raise ParseError("exponent must be an integer literal", pos)
            k = int(text)
            if k > EXPONENT_CAP:
                raise ParseError("exponent overflow", pos)
            return base ** k
        return base

    def atom(self) -> Polynomial:
        kind, text, pos = self.advance()
        if kind == "int":
            return self.ring.const(int(text))
        if kind == "name":
            if text not in self.ring.names:
                raise ParseError(f"unknown variable {text!r}", pos)
            return self.ring.var(text)
        if kind == "op" and text == "(":
            value = self.expr()
            kind, text, pos = self.advance()
            if not (kind == "op" and text == ")"):
                if kind in ("int", "name") or text == "(":
                    raise ParseError(
                        "juxtaposition is not multiplication; use '*'", pos
                    )
                raise ParseError("expected ')'", pos)
            return value
        raise ParseError(f"unexpected {text!r}" if text else "unexpected end of input", pos)


def parse(text: str, ring: PolyRing) -> Polynomial:
    """Parse a polynomial expression into its canonical form.

    Grammar: integer literals, ring variables, + - * ^ and parentheses.
    str(parse(t, ring)) reparses to an equal polynomial.
    """
    return _Parser(text, ring).parse()
