"""Frobenius pushforward of presented modules.

Over S = F_p[x_1..x_n] the pushforward F^e_* S is free of rank q^n,
q = p^e, with the monomial basis x^b, b in {0..q-1}^n. Multiplication by
a polynomial becomes a q^n x q^n matrix over S; applying this blockwise
to a presentation matrix and reinterpreting entries in R = S/I gives a
presentation of the pushforward over R.
"""

from __future__ import annotations

from typing import Sequence

from .ffpoly import Polynomial, PolyRing, qsplit_exps
from .groebner import Budget, DEFAULT_BUDGET
from .modpres import PresentedModule, QuotientRing, RMatrix, prune


class PushforwardBasis:
    """The index set {0..q-1}^n with its base-q positional encoding.

    The first variable is most significant, so multi-index (i_1..i_n)
    maps to sum of i_j * q^(n-j-1).
    """

    __slots__ = ("q", "n", "size")

    def __init__(self, q: int, n: int):
        if q < 1 or n < 0:
            raise ValueError("need q >= 1 and n >= 0")
        self.q = q
        self.n = n
        self.size = q ** n

    def to_number(self, idx: Sequence[int]) -> int:
        if len(idx) != self.n:
            raise ValueError("multi-index length mismatch")
        num = 0
        for i in idx:
            if not 0 <= i < self.q:
                raise ValueError("multi-index component out of range")
            num = num * self.q + i
        return num

    def to_multiindex(self, num: int) -> tuple[int, ...]:
        if not 0 <= num < self.size:
            raise ValueError("index out of range")
        out = [0] * self.n
        for j in reversed(range(self.n)):
            num, out[j] = divmod(num, self.q)
        return tuple(out)

    def __iter__(self):
        for num in range(self.size):
            yield self.to_multiindex(num)


class UMatrix:
    """Pushforward of a matrix map, blocked by the source shape.

    A q^n*l x q^n*m grid over S presenting F^e_* of the map defined by
    an l x m matrix.
    """

    __slots__ = ("ring", "basis", "block_shape", "entries")

    def __init__(self, ring: PolyRing, basis: PushforwardBasis,
                 block_shape: tuple[int, int], entries: list[list[Polynomial]]):
        self.ring = ring
        self.basis = basis
        self.block_shape = block_shape
        self.entries = entries

    @property
    def rows(self) -> int:
        return len(self.entries)

    @property
    def cols(self) -> int:
        return len(self.entries[0]) if self.entries else 0

    def __add__(self, other: "UMatrix") -> "UMatrix":
        if (self.ring, self.basis.q, self.block_shape) != (other.ring, other.basis.q, other.block_shape):
            raise ValueError("shape mismatch")
        grid = [
            [a + b for a, b in zip(ra, rb)]
            for ra, rb in zip(self.entries, other.entries)
        ]
        return UMatrix(self.ring, self.basis, self.block_shape, grid)

    def __mul__(self, other: "UMatrix") -> "UMatrix":
        if self.cols != other.rows:
            raise ValueError("shape mismatch")
        zero = self.ring.zero()
        grid = [[zero] * other.cols for _ in range(self.rows)]
        for i, row in enumerate(self.entries):
            nz = [(k, e) for k, e in enumerate(row) if not e.is_zero()]
            for j in range(other.cols):
                acc = zero
                for k, e in nz:
                    o = other.entries[k][j]
                    if not o.is_zero():
                        acc = acc + e * o
                grid[i][j] = acc
        return UMatrix(self.ring, self.basis, (self.block_shape[0], other.block_shape[1]), grid)

    def __eq__(self, other):
        return (
            isinstance(other, UMatrix)
            and self.ring == other.ring
            and self.entries == other.entries
        )

    def column_structure_ok(self) -> bool:
        """Monomial blocks have exactly one nonzero (monomial) entry per column."""
        for j in range(self.cols):
            nz = [self.entries[i][j] for i in range(self.rows) if not self.entries[i][j].is_zero()]
            if len(nz) != 1 or len(nz[0].terms) != 1:
                return False
        return True


def u_monomial(a: Sequence[int], e: int, ring: PolyRing) -> UMatrix:
    """Multiplication by x^a on the pushforward basis.

    Entry (i, j) is x^((a+j) div q) in row i = (a+j) mod q, componentwise.
    """
    if e < 0:
        raise ValueError("e must be >= 0")
    q = ring.p ** e
    basis = PushforwardBasis(q, ring.n)
    a = tuple(a)
    zero = ring.zero()
    grid = [[zero] * basis.size for _ in range(basis.size)]
    for j_num in range(basis.size):
        j = basis.to_multiindex(j_num)
        s = tuple(x + y for x, y in zip(a, j))
        quo, rem = qsplit_exps(s, q)
        grid[basis.to_number(rem)][j_num] = ring.monomial(quo)
    return UMatrix(ring, basis, (1, 1), grid)


def u_poly(f: Polynomial, e: int) -> UMatrix:
    """Pushforward of multiplication by f: sum of c_a * U(a, e).

    Coefficients pass through unchanged; the Frobenius of F_p is the
    identity."""
    ring = f.ring
    q = ring.p ** e
    basis = PushforwardBasis(q, ring.n)
    acc: list[list[dict]] = [[{} for _ in range(basis.size)] for _ in range(basis.size)]
    for a, c in f.terms:
        for j_num in range(basis.size):
            j = basis.to_multiindex(j_num)
            s = tuple(x + y for x, y in zip(a, j))
            quo, rem = qsplit_exps(s, q)
            cell = acc[basis.to_number(rem)][j_num]
            cell[quo] = (cell.get(quo, 0) + c) % ring.p
    grid = [[ring.from_dict(cell) for cell in row] for row in acc]
    return UMatrix(ring, basis, (1, 1), grid)


def u_matrix(A: Sequence[Sequence[Polynomial]], e: int, ring: PolyRing | None = None) -> UMatrix:
    """Blockwise pushforward of an l x m matrix over S.

    If A presents M over S, the result presents F^e_* M over S."""
    l = len(A)
    m = len(A[0]) if l else 0
    if ring is None:
        ring = A[0][0].ring
    q = ring.p ** e
    basis = PushforwardBasis(q, ring.n)
    size = basis.size
    zero = ring.zero()
    grid = [[zero] * (size * m) for _ in range(size * l)]
    for bi in range(l):
        for bj in range(m):
            entry = A[bi][bj]
            if entry.is_zero():
                continue
            block = u_poly(entry, e)
            for i in range(size):
                row = grid[bi * size + i]
                brow = block.entries[i]
                for j in range(size):
                    if not brow[j].is_zero():
                        row[bj * size + j] = brow[j]
    return UMatrix(ring, basis, (l, m), grid)


def s_presentation(M: PresentedModule) -> list[list[Polynomial]]:
    """Presentation of M as a module over the ambient polynomial ring.

    Columns are the lifted columns of M's matrix followed by f*e_i for
    every relation f of the quotient ideal and every generator slot i."""
    qring = M.ring
    amb = qring.ambient
    t = M.matrix.rows
    cols: list[list[Polynomial]] = []
    for j in range(M.matrix.cols):
        cols.append([M.matrix.entries[i][j] for i in range(t)])
    zero = amb.zero()
    for f in qring.relations:
        for i in range(t):
            col = [zero] * t
            col[i] = f
            cols.append(col)
    return [[cols[j][i] for j in range(len(cols))] for i in range(t)]


def pushforward(M: PresentedModule, e: int, budget: Budget | None = None) -> PresentedModule:
    """Pruned presentation of F^e_* M over R = S/I."""
    if e < 1:
        raise ValueError("e must be >= 1")
    budget = budget or DEFAULT_BUDGET
    qring = M.ring
    B = s_presentation(M)
    U = u_matrix(B, e, qring.ambient)
    raw = PresentedModule(qring, RMatrix(qring, U.entries))
    return prune(raw, budget)
