"""Groebner bases over F_p[x_1..x_n]: normal forms, elimination, dimension.

Plain Buchberger with the normal selection strategy (pairs ordered by lcm
degree, ties broken by generator index) and both classical pair criteria.
All computations run under an explicit resource budget and fail loudly
with BudgetExceeded instead of running unbounded.
"""

from __future__ import annotations

import heapq
import time
from typing import Iterable, Sequence

from .ffpoly import Polynomial, PolyRing, TermOrder, mul_exps


class BudgetExceeded(RuntimeError):
    """A computation hit its resource budget; partial results are unusable."""

    def __init__(self, context: str):
        super().__init__(f"budget exceeded: {context}")
        self.context = context


class EmptySchemeError(ValueError):
    """The ideal is the unit ideal; the scheme is empty."""


class Budget:
    """Resource limits for Groebner-type computations."""

    __slots__ = ("max_basis", "max_degree", "deadline")

    def __init__(self, max_basis: int = 20000, max_degree: int = 200,
                 seconds: float | None = None):
        self.max_basis = max_basis
        self.max_degree = max_degree
        self.deadline = time.monotonic() + seconds if seconds else None

    def check_time(self, context: str):
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise BudgetExceeded(f"wall clock, {context}")

    def sub(self, seconds: float | None = None) -> "Budget":
        b = Budget(self.max_basis, self.max_degree)
        b.deadline = self.deadline
        if seconds is not None:
            d = time.monotonic() + seconds
            b.deadline = d if b.deadline is None else min(b.deadline, d)
        return b


DEFAULT_BUDGET = Budget()


class IdealGens:
    """A generator list for an ideal; zero generators are dropped."""

    __slots__ = ("ring", "generators")

    def __init__(self, ring: PolyRing, generators: Iterable[Polynomial]):
        gens = []
        for g in generators:
            if g.ring != ring:
                raise ValueError("mismatched rings in ideal generators")
            if not g.is_zero():
                gens.append(g)
        self.ring = ring
        self.generators = tuple(gens)

    def __iter__(self):
        return iter(self.generators)

    def __len__(self):
        return len(self.generators)

    def __eq__(self, other):
        return (
            isinstance(other, IdealGens)
            and self.ring == other.ring
            and self.generators == other.generators
        )

    def __repr__(self):
        return f"IdealGens({[str(g) for g in self.generators]})"


class ReducedGB:
    """The unique reduced Groebner basis for a fixed ring and order."""

    __slots__ = ("ring", "basis")

    def __init__(self, ring: PolyRing, basis: tuple[Polynomial, ...]):
        self.ring = ring
        self.basis = basis

    def is_unit_ideal(self) -> bool:
        return len(self.basis) == 1 and self.basis[0].is_constant() and not self.basis[0].is_zero()

    def is_zero_ideal(self) -> bool:
        return not self.basis

    def __iter__(self):
        return iter(self.basis)

    def __len__(self):
        return len(self.basis)

    def __eq__(self, other):
        return (
            isinstance(other, ReducedGB)
            and self.ring == other.ring
            and self.basis == other.basis
        )

    def __hash__(self):
        return hash((self.ring, self.basis))

    def __repr__(self):
        return f"ReducedGB({[str(g) for g in self.basis]})"


# -- reduction ---------------------------------------------------------------


def _divides(a: tuple[int, ...], b: tuple[int, ...]) -> bool:
    for x, y in zip(a, b):
        if x > y:
            return False
    return True


def _reduce_dict(work: dict, reducers: list[tuple[tuple[int, ...], tuple]], ring: PolyRing) -> dict:
    """Full normal form of the term dict `work` against monic reducers.

    Each reducer is (leading exps, tail terms); tails exclude the lead.
    """
    p = ring.p
    key = ring.key
    out: dict[tuple[int, ...], int] = {}
    while work:
        lt = max(work, key=key)
        c = work.pop(lt)
        if not c:
            continue
        hit = False
        for glt, gtail in reducers:
            if _divides(glt, lt):
                delta = tuple(a - b for a, b in zip(lt, glt))
                for ge, gc in gtail:
                    e = mul_exps(ge, delta)
                    nc = (work.get(e, 0) - c * gc) % p
                    if nc:
                        work[e] = nc
                    else:
                        work.pop(e, None)
                hit = True
                break
        if not hit:
            out[lt] = c
    return out


def _as_reducers(basis: Sequence[Polynomial]) -> list[tuple[tuple[int, ...], tuple]]:
    return [(g.lm(), g.terms[1:]) for g in basis if not g.is_zero()]


def normal_form(f: Polynomial, gb: ReducedGB | Sequence[Polynomial]) -> Polynomial:
    """Remainder of f on division by the basis; idempotent, canonical."""
    basis = gb.basis if isinstance(gb, ReducedGB) else tuple(gb)
    if isinstance(gb, ReducedGB) and f.ring != gb.ring:
        raise ValueError("mismatched rings")
    if not basis:
        return f
    ring = f.ring
    reduced = _reduce_dict(dict(f.terms), _as_reducers(basis), ring)
    return ring.from_dict(reduced)


# -- Buchberger --------------------------------------------------------------


def _spoly(f: Polynomial, g: Polynomial) -> Polynomial:
    """S-polynomial of two monic polynomials."""
    ring = f.ring
    fl, gl = f.lm(), g.lm()
    lcm = tuple(max(a, b) for a, b in zip(fl, gl))
    mf = tuple(a - b for a, b in zip(lcm, fl))
    mg = tuple(a - b for a, b in zip(lcm, gl))
    return ring.monomial(mf) * f - ring.monomial(mg) * g


def buchberger(gens: IdealGens | Sequence[Polynomial], budget: Budget | None = None) -> ReducedGB:
    """The unique reduced Groebner basis of the given ideal."""
    if isinstance(gens, IdealGens):
        ring = gens.ring
        inputs = list(gens.generators)
    else:
        inputs = [g for g in gens if not g.is_zero()]
        if not inputs:
            raise ValueError("cannot infer ring from an empty generator list")
        ring = inputs[0].ring
        for g in inputs:
            if g.ring != ring:
                raise ValueError("mismatched rings")
    budget = budget or DEFAULT_BUDGET

    basis: list[Polynomial] = []
    for g in inputs:
        h = normal_form(g, basis) if basis else g
        if not h.is_zero():
            basis.append(h.monic())

    # Pair queue keyed by (lcm degree, i, j); classical two criteria.
    pairs: list[tuple[int, int, int]] = []
    lcms: dict[tuple[int, int], tuple[int, ...]] = {}

    def push_pairs(t: int):
        gt = basis[t].lm()
        for i in range(t):
            gi = basis[i].lm()
            lcm = tuple(max(a, b) for a, b in zip(gi, gt))
            if lcm == mul_exps(gi, gt):
                continue  # coprime leads: s-poly reduces to zero
            lcms[(i, t)] = lcm
            heapq.heappush(pairs, (sum(lcm), i, t))

    for t in range(len(basis)):
        push_pairs(t)

    steps = 0
    while pairs:
        steps += 1
        if steps % 64 == 0:
            budget.check_time("buchberger")
        _, i, j = heapq.heappop(pairs)
        if (i, j) not in lcms:
            continue
        lcm = lcms.pop((i, j))
        # chain criterion: an already-handled k with lt_k | lcm(i,j)
        skip = False
        for k in range(len(basis)):
            if k == i or k == j:
                continue
            if _divides(basis[k].lm(), lcm):
                a = (min(i, k), max(i, k))
                b = (min(j, k), max(j, k))
                if a not in lcms and b not in lcms:
                    skip = True
                    break
        if skip:
            continue
        h = normal_form(_spoly(basis[i], basis[j]), basis)
        if h.is_zero():
            continue
        if h.degree() > budget.max_degree:
            raise BudgetExceeded(f"degree {h.degree()} in buchberger")
        basis.append(h.monic())
        if len(basis) > budget.max_basis:
            raise BudgetExceeded("basis size in buchberger")
        push_pairs(len(basis) - 1)

    return _reduce_basis(ring, basis)


def _reduce_basis(ring: PolyRing, basis: list[Polynomial]) -> ReducedGB:
    """Minimalize and autoreduce a Groebner basis; sort descending."""
    key = ring.key
    # In a monomial order a | b implies a <= b, so an ascending scan that
    # checks only already-kept leads is a complete minimalization.
    items = sorted((g for g in basis if not g.is_zero()),
                   key=lambda g: key(g.lm()))
    minimal: list[Polynomial] = []
    for g in items:
        lm = g.lm()
        if any(_divides(h.lm(), lm) for h in minimal):
            continue
        minimal.append(g)
    reduced = []
    for i, g in enumerate(minimal):
        others = minimal[:i] + minimal[i + 1:]
        h = normal_form(g, others) if others else g
        if not h.is_zero():
            reduced.append(h.monic())
    reduced.sort(key=lambda g: key(g.lm()), reverse=True)
    return ReducedGB(ring, tuple(reduced))


# -- membership and elimination ----------------------------------------------


def membership(f: Polynomial, gb: ReducedGB) -> bool:
    return normal_form(f, gb).is_zero()


def radical_membership(f: Polynomial, gens: IdealGens | Sequence[Polynomial],
                       budget: Budget | None = None) -> bool:
    """f in sqrt(I) iff 1 in I + (1 - y*f) for a fresh variable y."""
    if isinstance(gens, IdealGens):
        ring = gens.ring
        glist = list(gens.generators)
    else:
        glist = list(gens)
        ring = glist[0].ring if glist else f.ring
    if f.is_zero():
        return True
    if not glist:
        return False
    aux = "_rad"
    while aux in ring.names:
        aux += "_"
    ext = PolyRing(ring.p, ring.names + (aux,), ring.order)
    lifted = [g.cast(ext) for g in glist]
    lifted.append(ext.one() - ext.var(aux) * f.cast(ext))
    gb = buchberger(lifted, budget)
    return gb.is_unit_ideal()


def eliminate(gens: IdealGens, drop: Iterable[str], budget: Budget | None = None) -> IdealGens:
    """Generators of the ideal's intersection with the subring without `drop`.

    Computed with a block elimination order putting the dropped variables
    first. The result lives in a ring over the surviving variables with the
    input ring's original order.
    """
    drop = set(drop)
    ring = gens.ring
    unknown = drop - set(ring.names)
    if unknown:
        raise ValueError(f"cannot drop unknown variables {sorted(unknown)}")
    if not drop:
        return gens
    dropped = [nm for nm in ring.names if nm in drop]
    kept = [nm for nm in ring.names if nm not in drop]
    work = PolyRing(ring.p, tuple(dropped + kept), TermOrder.block(len(dropped)))
    gb = buchberger([g.cast(work) for g in gens], budget)
    out_ring = PolyRing(ring.p, tuple(kept), ring.order)
    survivors = []
    k = len(dropped)
    for g in gb:
        if all(not any(e[:k]) for e, _ in g.terms):
            survivors.append(g.cast(out_ring))
    return IdealGens(out_ring, survivors)


# -- dimension ---------------------------------------------------------------


def dimension(gens: IdealGens | ReducedGB, budget: Budget | None = None) -> int:
    """Krull dimension of ring/ideal via independent variable subsets.

    Raises EmptySchemeError for the unit ideal.
    """
    gb = gens if isinstance(gens, ReducedGB) else buchberger(gens, budget) if len(gens) else None
    if gb is None or gb.is_zero_ideal():
        ring = gens.ring
        return ring.n
    if gb.is_unit_ideal():
        raise EmptySchemeError("unit ideal has an empty scheme")
    n = gb.ring.n
    supports = []
    for g in gb:
        supp = frozenset(i for i, e in enumerate(g.lm()) if e)
        supports.append(supp)
    supports = sorted(set(supports), key=lambda s: (len(s), sorted(s)))
    best = 0

    def search(idx: int, chosen: frozenset[int]):
        nonlocal best
        if len(chosen) + (n - idx) <= best:
            return
        if idx == n:
            best = max(best, len(chosen))
            return
        trial = chosen | {idx}
        if all(not s <= trial for s in supports):
            search(idx + 1, trial)
        search(idx + 1, chosen)

    search(0, frozenset())
    return best


# -- Jacobians and minors ------------------------------------------------------


def jacobian(gens: IdealGens | Sequence[Polynomial]) -> list[list[Polynomial]]:
    """Formal Jacobian matrix: one row per generator, one column per variable."""
    glist = list(gens.generators) if isinstance(gens, IdealGens) else list(gens)
    if not glist:
        return []
    ring = glist[0].ring
    return [[g.deriv(nm) for nm in ring.names] for g in glist]


def det(grid: Sequence[Sequence[Polynomial]], ring: PolyRing | None = None) -> Polynomial:
    """Determinant by cofactor expansion with subproblem memoization."""
    m = len(grid)
    if ring is None:
        ring = grid[0][0].ring
    if m == 0:
        return ring.one()
    cols0 = tuple(range(m))
    memo: dict[tuple[int, tuple[int, ...]], Polynomial] = {}

    def rec(r: int, cols: tuple[int, ...]) -> Polynomial:
        if not cols:
            return ring.one()
        key = (r, cols)
        got = memo.get(key)
        if got is not None:
            return got
        acc = ring.zero()
        sign = 1
        for t, c in enumerate(cols):
            entry = grid[r][c]
            if not entry.is_zero():
                sub = rec(r + 1, cols[:t] + cols[t + 1:])
                if not sub.is_zero():
                    piece = entry * sub
                    acc = acc + piece if sign > 0 else acc - piece
            sign = -sign
        memo[key] = acc
        return acc

    return rec(0, cols0)


def _subsets(n: int, k: int):
    idx = list(range(k))
    while True:
        yield tuple(idx)
        for i in reversed(range(k)):
            if idx[i] != i + n - k:
                break
        else:
            return
        idx[i] += 1
        for j in range(i + 1, k):
            idx[j] = idx[j - 1] + 1


def minors(grid: Sequence[Sequence[Polynomial]], k: int,
           budget: Budget | None = None) -> list[Polynomial]:
    """All k x k minors, rows and columns in lexicographic subset order."""
    rows = len(grid)
    cols = len(grid[0]) if rows else 0
    if k < 0 or k > min(rows, cols):
        raise ValueError(f"minor size {k} out of range for {rows}x{cols}")
    if rows == 0 or cols == 0:
        return []
    ring = grid[0][0].ring
    if k == 0:
        return [ring.one()]
    budget = budget or DEFAULT_BUDGET
    out = []
    count = 0
    for rsub in _subsets(rows, k):
        for csub in _subsets(cols, k):
            count += 1
            if count % 256 == 0:
                budget.check_time("minors")
            sub = [[grid[r][c] for c in csub] for r in rsub]
            out.append(det(sub, ring))
    return out
