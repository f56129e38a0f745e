"""Module presentations over quotient rings R = S/I.

A module is the cokernel of a matrix over R (rows = generators, columns =
relations). This module computes ranks, Fitting ideals, pruned
presentations, heuristic direct-sum block decompositions, and
isomorphism-invariant signatures built from ranks and Fitting ideals.

Ring elements are represented by ambient polynomials kept in normal form
with respect to the cached reduced Groebner basis of the relation ideal.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Sequence

from .ffpoly import Polynomial, PolyRing, mul_exps
from .groebner import (
    Budget,
    BudgetExceeded,
    DEFAULT_BUDGET,
    IdealGens,
    ReducedGB,
    _divides,
    _subsets,
    buchberger,
    normal_form,
)

_NF_CACHE_MAX = 200_000


class QuotientRing:
    """Ambient polynomial ring modulo a proper relation ideal.

    The reduced Groebner basis of the relations is computed once and
    cached; all entry arithmetic happens in normal form against it.
    The ring is assumed to be a domain for rank computations; this is
    not verified.
    """

    __slots__ = ("ambient", "relations", "gb", "_nf_cache")

    def __init__(self, ambient: PolyRing, relations: IdealGens | Iterable[Polynomial],
                 budget: Budget | None = None):
        if not isinstance(relations, IdealGens):
            relations = IdealGens(ambient, relations)
        if relations.ring != ambient:
            raise ValueError("relations must live in the ambient ring")
        self.ambient = ambient
        self.relations = relations
        if relations.generators:
            self.gb = buchberger(relations, budget)
        else:
            self.gb = ReducedGB(ambient, ())
        if self.gb.is_unit_ideal():
            raise ValueError("relations generate the unit ideal")
        self._nf_cache: dict = {}

    def nf(self, f: Polynomial) -> Polynomial:
        if f.ring != self.ambient:
            f = f.cast(self.ambient)
        if not self.gb.basis or f.is_zero():
            return f
        cached = self._nf_cache.get(f.terms)
        if cached is not None:
            return cached
        out = normal_form(f, self.gb)
        if len(self._nf_cache) > _NF_CACHE_MAX:
            self._nf_cache.clear()
        self._nf_cache[f.terms] = out
        return out

    def is_zero_element(self, f: Polynomial) -> bool:
        return self.nf(f).is_zero()

    def is_polynomial_ring(self) -> bool:
        return not self.gb.basis

    def __eq__(self, other):
        return (
            isinstance(other, QuotientRing)
            and self.ambient == other.ambient
            and self.gb == other.gb
        )

    def __hash__(self):
        return hash((self.ambient, self.gb))

    def __repr__(self):
        rels = ", ".join(str(g) for g in self.gb)
        return f"QuotientRing(F_{self.ambient.p}[{','.join(self.ambient.names)}]/({rels}))"


class RMatrix:
    """A rows x cols grid over a quotient ring, entries in normal form."""

    __slots__ = ("ring", "rows", "cols", "entries")

    def __init__(self, ring: QuotientRing, entries: Sequence[Sequence[Polynomial]],
                 normalize: bool = True):
        rows = len(entries)
        cols = len(entries[0]) if rows else 0
        grid = []
        for row in entries:
            if len(row) != cols:
                raise ValueError("ragged matrix")
            grid.append([ring.nf(e) if normalize else e for e in row])
        self.ring = ring
        self.rows = rows
        self.cols = cols
        self.entries = grid

    @classmethod
    def zero(cls, ring: QuotientRing, rows: int, cols: int) -> "RMatrix":
        z = ring.ambient.zero()
        return cls(ring, [[z] * cols for _ in range(rows)], normalize=False)

    def copy_grid(self) -> list[list[Polynomial]]:
        return [row[:] for row in self.entries]

    def transpose(self) -> "RMatrix":
        grid = [[self.entries[i][j] for i in range(self.rows)] for j in range(self.cols)]
        return RMatrix(self.ring, grid, normalize=False)

    def submatrix(self, rows: Sequence[int], cols: Sequence[int]) -> "RMatrix":
        grid = [[self.entries[i][j] for j in cols] for i in rows]
        return RMatrix(self.ring, grid, normalize=False)

    def __eq__(self, other):
        return (
            isinstance(other, RMatrix)
            and self.ring == other.ring
            and self.entries == other.entries
        )

    def __repr__(self):
        body = "; ".join(", ".join(str(e) for e in row) for row in self.entries)
        return f"RMatrix({self.rows}x{self.cols}: {body})"


class PresentedModule:
    """Coker of a matrix over R: rows are generators, columns relations."""

    __slots__ = ("ring", "matrix")

    def __init__(self, ring: QuotientRing, matrix: RMatrix):
        if matrix.ring != ring:
            raise ValueError("matrix ring mismatch")
        self.ring = ring
        self.matrix = matrix

    @classmethod
    def from_rows(cls, ring: QuotientRing, rows: Sequence[Sequence[Polynomial]]) -> "PresentedModule":
        return cls(ring, RMatrix(ring, rows))

    @classmethod
    def free(cls, ring: QuotientRing, rank: int) -> "PresentedModule":
        return cls(ring, RMatrix.zero(ring, rank, 0))

    @property
    def generators(self) -> int:
        return self.matrix.rows

    @property
    def relations(self) -> int:
        return self.matrix.cols

    def __repr__(self):
        return f"PresentedModule({self.matrix.rows} gens, {self.matrix.cols} rels)"


# -- determinants with normal-form compression --------------------------------


def _det_nf(grid, rows: tuple[int, ...], cols: tuple[int, ...], qring: QuotientRing,
            memo: dict) -> Polynomial:
    """Determinant of the selected submatrix, reduced mod the relations."""
    amb = qring.ambient
    if not rows:
        return amb.one()
    key = (rows, cols)
    got = memo.get(key)
    if got is not None:
        return got
    r0 = rows[0]
    acc = amb.zero()
    sign = 1
    for t, c in enumerate(cols):
        entry = grid[r0][c]
        if not entry.is_zero():
            sub = _det_nf(grid, rows[1:], cols[:t] + cols[t + 1:], qring, memo)
            if not sub.is_zero():
                piece = entry * sub
                acc = acc + piece if sign > 0 else acc - piece
        sign = -sign
    acc = qring.nf(acc)
    memo[key] = acc
    return acc


# -- rank ----------------------------------------------------------------------


def _matrix_rank(grid, qring: QuotientRing, budget: Budget | None = None,
                 row_pool: Sequence[int] | None = None,
                 col_pool: Sequence[int] | None = None,
                 memo: dict | None = None) -> tuple[int, tuple[int, ...], tuple[int, ...]]:
    """Rank over Frac(R) by growing a nonvanishing-minor certificate.

    Column independence over the fraction field is a matroid, so greedily
    extending one maximal certificate yields the true rank. Returns
    (rank, certificate rows, certificate cols).
    """
    budget = budget or DEFAULT_BUDGET
    rows = list(row_pool if row_pool is not None else range(len(grid)))
    cols = list(col_pool if col_pool is not None else range(len(grid[0]) if grid else 0))
    memo = {} if memo is None else memo
    cert_rows: tuple[int, ...] = ()
    cert_cols: tuple[int, ...] = ()
    for j in cols:
        budget.check_time("matrix rank")
        candidates = [i for i in rows if i not in cert_rows]
        # try sparse rows first; deterministic tie-break by index
        candidates.sort(key=lambda i: (len(grid[i][j].terms), i))
        for i in candidates:
            trial_rows = tuple(sorted(cert_rows + (i,)))
            trial_cols = tuple(sorted(cert_cols + (j,)))
            if not _det_nf(grid, trial_rows, trial_cols, qring, memo).is_zero():
                cert_rows, cert_cols = trial_rows, trial_cols
                break
    return len(cert_cols), cert_rows, cert_cols


def module_rank(M: PresentedModule, budget: Budget | None = None) -> int:
    """Rank of Coker over the fraction field (the ring must be a domain)."""
    r, _, _ = _matrix_rank(M.matrix.entries, M.ring, budget)
    return M.matrix.rows - r


# -- Fitting ideals -------------------------------------------------------------


def _all_minors(grid, size: int, qring: QuotientRing, row_pool: Sequence[int],
                col_pool: Sequence[int], budget: Budget, memo: dict | None = None):
    """Yield minors of the given size, row-major subset order, unreduced ideals."""
    memo = {} if memo is None else memo
    nrows, ncols = len(row_pool), len(col_pool)
    if size > min(nrows, ncols):
        return
    if size == 0:
        yield qring.ambient.one()
        return
    count = 0
    for rsub in _subsets(nrows, size):
        rows = tuple(row_pool[i] for i in rsub)
        for csub in _subsets(ncols, size):
            cols = tuple(col_pool[j] for j in csub)
            count += 1
            if count % 128 == 0:
                budget.check_time("minors")
            yield _det_nf(grid, rows, cols, qring, memo)


def fitting_ideal(k: int, M: PresentedModule, budget: Budget | None = None) -> IdealGens:
    """Fitt_k: the ideal of (t-k)-minors of the presentation matrix.

    Generators are returned in normal form over the ambient ring; they
    represent an ideal of the quotient ring. Conventions: minor size
    above matrix dimensions gives the zero ideal, size <= 0 the unit
    ideal.
    """
    if k < 0 or k > M.matrix.rows:
        raise ValueError(f"fitting index {k} out of range")
    budget = budget or DEFAULT_BUDGET
    amb = M.ring.ambient
    size = M.matrix.rows - k
    if size <= 0:
        return IdealGens(amb, [amb.one()])
    if size > min(M.matrix.rows, M.matrix.cols):
        return IdealGens(amb, [])
    seen = set()
    out = []
    for m in _all_minors(M.matrix.entries, size, M.ring,
                         range(M.matrix.rows), range(M.matrix.cols), budget):
        if m.is_zero():
            continue
        m = m.monic()
        if m.terms in seen:
            continue
        seen.add(m.terms)
        out.append(m)
    return IdealGens(amb, out)


# -- module Groebner bases -------------------------------------------------------

# Vectors in S^t are dicts {(position, exponents): coeff}; the order is
# term-over-position: ring order on exponents first, lower position wins ties.


def _mv_key(ring: PolyRing):
    rk = ring.key
    return lambda pe: (rk(pe[1]), -pe[0])


def _mv_from_columns(col: Sequence[Polynomial]) -> dict:
    d = {}
    for pos, f in enumerate(col):
        for e, c in f.terms:
            d[(pos, e)] = c
    return d


def _mv_monic(d: dict, ring: PolyRing, key) -> dict:
    lead = max(d, key=key)
    c = d[lead]
    if c == 1:
        return d
    inv = pow(c, ring.p - 2, ring.p)
    return {k: (v * inv) % ring.p for k, v in d.items()}


def _mv_reduce(work: dict, reducers, ring: PolyRing, budget: Budget) -> dict:
    p = ring.p
    key = _mv_key(ring)
    out: dict = {}
    steps = 0
    while work:
        steps += 1
        if steps % 512 == 0:
            budget.check_time("module reduction")
        lead = max(work, key=key)
        c = work.pop(lead)
        if not c:
            continue
        lp, le = lead
        hit = False
        for (gp, ge), gtail in reducers:
            if gp == lp and _divides(ge, le):
                delta = tuple(a - b for a, b in zip(le, ge))
                for (tp, te), tc in gtail:
                    kk = (tp, mul_exps(te, delta))
                    nc = (work.get(kk, 0) - c * tc) % p
                    if nc:
                        work[kk] = nc
                    else:
                        work.pop(kk, None)
                hit = True
                break
        if not hit:
            out[lead] = c
    return out


def _mv_as_reducer(d: dict, key):
    lead = max(d, key=key)
    tail = tuple((k, v) for k, v in d.items() if k != lead)
    return lead, tail


def _module_gb(vectors: Sequence[dict], ring: PolyRing, budget: Budget | None = None) -> list[dict]:
    """Groebner basis of the submodule of S^t spanned by the vectors.

    Buchberger adapted to free modules: S-pairs only form between
    vectors whose leads sit in the same position. The product criterion
    is not valid for modules and is not used.
    """
    budget = budget or DEFAULT_BUDGET
    key = _mv_key(ring)
    basis: list[dict] = []
    reducers: list = []
    for v in vectors:
        v = {k: c % ring.p for k, c in v.items() if c % ring.p}
        if not v:
            continue
        v = _mv_reduce(dict(v), reducers, ring, budget)
        if v:
            v = _mv_monic(v, ring, key)
            basis.append(v)
            reducers.append(_mv_as_reducer(v, key))

    pairs: list[tuple[int, int, int]] = []
    lcms: dict[tuple[int, int], tuple[int, tuple[int, ...]]] = {}
    import heapq

    def push_pairs(t: int):
        tp, te = reducers[t][0]
        for i in range(t):
            ip, ie = reducers[i][0]
            if ip != tp:
                continue
            lcm = tuple(max(a, b) for a, b in zip(ie, te))
            lcms[(i, t)] = (tp, lcm)
            heapq.heappush(pairs, (sum(lcm), i, t))

    for t in range(len(basis)):
        push_pairs(t)

    steps = 0
    while pairs:
        steps += 1
        if steps % 64 == 0:
            budget.check_time("module buchberger")
        _, i, j = heapq.heappop(pairs)
        if (i, j) not in lcms:
            continue
        lpos, lcm = lcms.pop((i, j))
        skip = False
        for k in range(len(basis)):
            if k == i or k == j:
                continue
            kp, ke = reducers[k][0]
            if kp == lpos and _divides(ke, lcm):
                a = (min(i, k), max(i, k))
                b = (min(j, k), max(j, k))
                if a not in lcms and b not in lcms:
                    skip = True
                    break
        if skip:
            continue
        # s-vector of two monic vectors with same lead position
        (ip, ie) = reducers[i][0]
        (jp, je) = reducers[j][0]
        di = tuple(a - b for a, b in zip(lcm, ie))
        dj = tuple(a - b for a, b in zip(lcm, je))
        s: dict = {}
        p = ring.p
        for (tp, te), tc in basis[i].items():
            kk = (tp, mul_exps(te, di))
            s[kk] = (s.get(kk, 0) + tc) % p
        for (tp, te), tc in basis[j].items():
            kk = (tp, mul_exps(te, dj))
            s[kk] = (s.get(kk, 0) - tc) % p
        s = {k: c for k, c in s.items() if c}
        h = _mv_reduce(s, reducers, ring, budget)
        if not h:
            continue
        h = _mv_monic(h, ring, key)
        basis.append(h)
        reducers.append(_mv_as_reducer(h, key))
        if len(basis) > budget.max_basis:
            raise BudgetExceeded("module basis size")
        push_pairs(len(basis) - 1)
    return basis


def _relation_vectors(qring: QuotientRing, positions: int) -> list[dict]:
    out = []
    for g in qring.gb:
        for pos in range(positions):
            out.append({(pos, e): c for e, c in g.terms})
    return out


def module_normal_form(v: Sequence[Polynomial], basis: Sequence[Sequence[Polynomial]],
                       qring: QuotientRing, budget: Budget | None = None) -> list[Polynomial]:
    """Normal form of a column vector modulo the submodule of R^t spanned
    by the basis columns (and implicitly by the relation ideal in every
    position). The result is zero iff v lies in that submodule."""
    budget = budget or DEFAULT_BUDGET
    t = len(v)
    for col in basis:
        if len(col) != t:
            raise ValueError("basis column length mismatch")
    gens = [_mv_from_columns([qring.nf(f) for f in col]) for col in basis]
    gens += _relation_vectors(qring, t)
    gb = _module_gb(gens, qring.ambient, budget)
    key = _mv_key(qring.ambient)
    reducers = [_mv_as_reducer(g, key) for g in gb]
    work = _mv_from_columns([qring.nf(f) for f in v])
    red = _mv_reduce(work, reducers, qring.ambient, budget)
    cols: list[dict] = [{} for _ in range(t)]
    for (pos, e), c in red.items():
        cols[pos][e] = c
    return [qring.ambient.from_dict(d) for d in cols]


# -- components ------------------------------------------------------------------


def _components(grid, rows: Sequence[int], cols: Sequence[int]):
    """Connected components of the bipartite row/column graph on nonzeros.

    Returns (component list, isolated rows, isolated cols); each component
    is a (rows tuple, cols tuple) pair sorted ascending.
    """
    row_adj = {i: set() for i in rows}
    col_adj = {j: set() for j in cols}
    for i in rows:
        for j in cols:
            if not grid[i][j].is_zero():
                row_adj[i].add(j)
                col_adj[j].add(i)
    seen_r: set[int] = set()
    seen_c: set[int] = set()
    comps = []
    for start in rows:
        if start in seen_r or not row_adj[start]:
            continue
        stack = [("r", start)]
        comp_r, comp_c = set(), set()
        while stack:
            kind, v = stack.pop()
            if kind == "r":
                if v in comp_r:
                    continue
                comp_r.add(v)
                for j in row_adj[v]:
                    if j not in comp_c:
                        stack.append(("c", j))
            else:
                if v in comp_c:
                    continue
                comp_c.add(v)
                for i in col_adj[v]:
                    if i not in comp_r:
                        stack.append(("r", i))
        seen_r |= comp_r
        seen_c |= comp_c
        comps.append((tuple(sorted(comp_r)), tuple(sorted(comp_c))))
    isolated_rows = tuple(i for i in rows if i not in seen_r)
    isolated_cols = tuple(j for j in cols if j not in seen_c)
    comps.sort(key=lambda rc: rc[0][0])
    return comps, isolated_rows, isolated_cols


# -- prune -------------------------------------------------------------------------


def _find_constant(grid, qring: QuotientRing):
    for i, row in enumerate(grid):
        for j, e in enumerate(row):
            if e.terms and e.is_constant():
                return i, j, e.constant_value()
    return None


def _pivot_constants(grid, qring: QuotientRing, budget: Budget):
    """Clear and delete rows/columns at nonzero-constant entries (in place)."""
    p = qring.ambient.p
    while True:
        budget.check_time("prune pivots")
        hit = _find_constant(grid, qring)
        if hit is None:
            return grid
        i0, j0, c = hit
        cinv = pow(c, p - 2, p)
        rows = len(grid)
        piv_col = [grid[i][j0] for i in range(rows)]
        for j in range(len(grid[0])):
            if j == j0:
                continue
            g = grid[i0][j]
            if g.is_zero():
                continue
            factor = g * cinv
            for i in range(rows):
                if not piv_col[i].is_zero():
                    grid[i][j] = qring.nf(grid[i][j] - factor * piv_col[i])
        del grid[i0]
        for row in grid:
            del row[j0]
        if grid and not grid[0]:
            return grid
        if not grid:
            return grid


def _drop_zero_columns(grid):
    if not grid:
        return grid
    keep = [j for j in range(len(grid[0]))
            if any(not grid[i][j].is_zero() for i in range(len(grid)))]
    return [[row[j] for j in keep] for row in grid]


def _drop_redundant_columns(grid, qring: QuotientRing, budget: Budget):
    """Remove columns lying in the module span of the others.

    Tested with module normal forms, one bipartite component at a time
    (spans never cross components because relation vectors are
    position-local)."""
    if not grid or not grid[0]:
        return grid
    rows = range(len(grid))
    cols = range(len(grid[0]))
    comps, _, _ = _components(grid, rows, cols)
    dropped: set[int] = set()
    for comp_rows, comp_cols in comps:
        active = list(comp_cols)
        for j in comp_cols:
            budget.check_time("prune columns")
            others = [jj for jj in active if jj != j]
            col = [grid[i][j] for i in comp_rows]
            if not others:
                continue
            basis = [[grid[i][jj] for i in comp_rows] for jj in others]
            nf = module_normal_form(col, basis, qring, budget)
            if all(f.is_zero() for f in nf):
                active.remove(j)
                dropped.add(j)
    keep = [j for j in cols if j not in dropped]
    return [[row[j] for j in keep] for row in grid]


def prune(M: PresentedModule, budget: Budget | None = None) -> PresentedModule:
    """Simplify a presentation without changing the module, by
    (a) normal-form reduction, (b) pivoting away nonzero-constant
    entries, (c) deleting zero and redundant relation columns.

    Entries like 1+x that are only local units are not pivoted. Zero
    rows are retained; they present free summands."""
    budget = budget or DEFAULT_BUDGET
    grid = M.matrix.copy_grid()
    grid = _pivot_constants(grid, M.ring, budget)
    grid = _drop_zero_columns(grid)
    grid = _drop_redundant_columns(grid, M.ring, budget)
    return PresentedModule(M.ring, RMatrix(M.ring, grid, normalize=False))


# -- block decomposition -------------------------------------------------------------


def _sparsify_constant_ops(grid, qring: QuotientRing, budget: Budget) -> bool:
    """Greedy F_p row/column eliminations that strictly reduce fill.

    Returns True if anything changed. Constant operations keep entries
    in normal form automatically."""
    if not grid or not grid[0]:
        return False
    p = qring.ambient.p
    nrows, ncols = len(grid), len(grid[0])

    def row_score(row):
        nnz = sum(1 for e in row if not e.is_zero())
        return (nnz, sum(len(e.terms) for e in row))

    changed = False
    improving = True
    sweeps = 0
    while improving and sweeps < 30:
        improving = False
        sweeps += 1
        budget.check_time("sparsify")
        for i2 in range(nrows):
            base = row_score(grid[i2])
            if base[0] == 0:
                continue
            for i1 in range(nrows):
                if i1 == i2:
                    continue
                for c in range(1, p):
                    cand = [grid[i2][j] - grid[i1][j] * c for j in range(ncols)]
                    if row_score(cand) < base:
                        grid[i2] = cand
                        base = row_score(cand)
                        improving = True
                        changed = True
        for j2 in range(ncols):
            col2 = [grid[i][j2] for i in range(nrows)]
            base = row_score(col2)
            if base[0] == 0:
                continue
            for j1 in range(ncols):
                if j1 == j2:
                    continue
                for c in range(1, p):
                    cand = [grid[i][j2] - grid[i][j1] * c for i in range(nrows)]
                    if row_score(cand) < base:
                        for i in range(nrows):
                            grid[i][j2] = cand[i]
                        base = row_score(cand)
                        improving = True
                        changed = True
    return changed


def _term_candidates(src: Polynomial, dst: Polynomial, ring: PolyRing):
    """Single-term multipliers lam with lam*src cancelling a term of dst."""
    if len(src.terms) != 1 or dst.is_zero():
        return
    (m, c) = src.terms[0]
    cinv = pow(c, ring.p - 2, ring.p)
    for m2, c2 in dst.terms:
        if _divides(m, m2):
            delta = tuple(a - b for a, b in zip(m2, m))
            yield ring.monomial(delta, (c2 * cinv) % ring.p)


def _sparsify_term_ops(grid, qring: QuotientRing, budget: Budget) -> bool:
    """Greedy eliminations with monomial multipliers; strictly reduce fill.

    These are still invertible elementary operations over R, so the
    cokernel is unchanged up to isomorphism."""
    if not grid or not grid[0]:
        return False
    amb = qring.ambient
    nrows, ncols = len(grid), len(grid[0])

    def vec_score(vec):
        nnz = sum(1 for e in vec if not e.is_zero())
        return (nnz, sum(len(e.terms) for e in vec))

    changed = False
    improving = True
    sweeps = 0
    while improving and sweeps < 30:
        improving = False
        sweeps += 1
        budget.check_time("sparsify")
        for i1 in range(nrows):
            for i2 in range(nrows):
                if i1 == i2:
                    continue
                base = vec_score(grid[i2])
                if base[0] == 0:
                    continue
                lams = set()
                for k in range(ncols):
                    for lam in _term_candidates(grid[i1][k], grid[i2][k], amb):
                        lams.add(lam)
                for lam in sorted(lams, key=lambda q: (len(q.terms), q.terms)):
                    cand = [qring.nf(grid[i2][j] - lam * grid[i1][j]) for j in range(ncols)]
                    if vec_score(cand) < base:
                        grid[i2] = cand
                        base = vec_score(cand)
                        improving = True
                        changed = True
        for j1 in range(ncols):
            for j2 in range(ncols):
                if j1 == j2:
                    continue
                col2 = [grid[i][j2] for i in range(nrows)]
                base = vec_score(col2)
                if base[0] == 0:
                    continue
                lams = set()
                for i in range(nrows):
                    for lam in _term_candidates(grid[i][j1], grid[i][j2], amb):
                        lams.add(lam)
                for lam in sorted(lams, key=lambda q: (len(q.terms), q.terms)):
                    cand = [qring.nf(grid[i][j2] - lam * grid[i][j1]) for i in range(nrows)]
                    if vec_score(cand) < base:
                        for i in range(nrows):
                            grid[i][j2] = cand[i]
                        base = vec_score(cand)
                        improving = True
                        changed = True
    return changed


def _grid_score(grid):
    nnz = 0
    terms = 0
    for row in grid:
        for e in row:
            if not e.is_zero():
                nnz += 1
                terms += len(e.terms)
    return (nnz, terms)


def _component_count(grid) -> int:
    if not grid:
        return 0
    comps, isolated_rows, _ = _components(grid, range(len(grid)), range(len(grid[0])))
    return len(comps) + len(isolated_rows)


def _sideways_moves(grid, qring: QuotientRing):
    """Elementary ops that keep (nnz, terms) but may untangle components.

    Only sparse sources are tried; deterministic ordering."""
    amb = qring.ambient
    nrows, ncols = len(grid), len(grid[0])

    def vec_score(vec):
        nnz = sum(1 for e in vec if not e.is_zero())
        return (nnz, sum(len(e.terms) for e in vec))

    for i1 in range(nrows):
        if sum(1 for e in grid[i1] if not e.is_zero()) > 3:
            continue
        for i2 in range(nrows):
            if i1 == i2:
                continue
            base = vec_score(grid[i2])
            if base[0] == 0:
                continue
            lams = set()
            for k in range(ncols):
                for lam in _term_candidates(grid[i1][k], grid[i2][k], amb):
                    lams.add(lam)
            for c in range(1, amb.p):
                lams.add(amb.const(c))
            for lam in sorted(lams, key=lambda q: (len(q.terms), q.terms)):
                cand = [qring.nf(grid[i2][j] - lam * grid[i1][j]) for j in range(ncols)]
                if vec_score(cand) == base:
                    yield ("row", i1, i2, lam, cand)
    for j1 in range(ncols):
        if sum(1 for i in range(nrows) if not grid[i][j1].is_zero()) > 3:
            continue
        for j2 in range(ncols):
            if j1 == j2:
                continue
            col2 = [grid[i][j2] for i in range(nrows)]
            base = vec_score(col2)
            if base[0] == 0:
                continue
            lams = set()
            for i in range(nrows):
                for lam in _term_candidates(grid[i][j1], grid[i][j2], amb):
                    lams.add(lam)
            for c in range(1, amb.p):
                lams.add(amb.const(c))
            for lam in sorted(lams, key=lambda q: (len(q.terms), q.terms)):
                cand = [qring.nf(grid[i][j2] - lam * grid[i][j1]) for i in range(nrows)]
                if vec_score(cand) == base:
                    yield ("col", j1, j2, lam, cand)


def _sparsify(grid, qring: QuotientRing, budget: Budget):
    """Strict-improvement sparsification plus constant pivoting, to quiescence."""
    for _ in range(6):
        _sparsify_constant_ops(grid, qring, budget)
        _sparsify_term_ops(grid, qring, budget)
        if _find_constant(grid, qring) is None:
            break
        grid = _pivot_constants(grid, qring, budget)
        grid = _drop_zero_columns(grid)
    return grid


def _untangle(grid, qring: QuotientRing, budget: Budget):
    """Sparsify with plateau escapes: accept an equal-fill move when the
    follow-up greedy strictly reduces fill or splits off a component."""
    grid = _sparsify(grid, qring, budget)
    if not grid or not grid[0]:
        return grid
    for _ in range(12):
        budget.check_time("untangle")
        best = (_component_count(grid), _grid_score(grid))
        accepted = None
        for kind, src, dst, lam, cand in _sideways_moves(grid, qring):
            trial = [row[:] for row in grid]
            if kind == "row":
                trial[dst] = cand
            else:
                for i in range(len(trial)):
                    trial[i][dst] = cand[i]
            trial = _sparsify(trial, qring, budget)
            if not trial or not trial[0]:
                accepted = trial
                break
            measure = (_component_count(trial), _grid_score(trial))
            if measure[0] > best[0] or measure[1] < best[1]:
                accepted = trial
                break
        if accepted is None:
            return grid
        grid = accepted
        if not grid or not grid[0]:
            return grid
    return grid


# Idempotent-based splitting. When elementary operations cannot untangle a
# presentation, look for an idempotent endomorphism e of the cokernel with
# polynomial entries of low degree; then M = eM + (1-e)M and the summands
# are presented by adjoining the columns of I-E resp. E to the relations.

_ENDO_MAX_ROWS = 16
_ENDO_DEGREES = (1, 2)


def _monomials_upto(ring: PolyRing, d: int):
    from itertools import product as _product
    return [e for e in _product(range(d + 1), repeat=ring.n) if sum(e) <= d]


def _nullspace_gf2(rows: Iterable[int], nbits: int) -> list[int]:
    """Nullspace basis of a homogeneous GF(2) system given as bitmask rows."""
    pivots: dict[int, int] = {}
    for mask in rows:
        while mask:
            low = mask & (-mask)
            pv = pivots.get(low)
            if pv is None:
                pivots[low] = mask
                break
            mask ^= pv
    basis = []
    ordered = sorted(pivots, reverse=True)
    for k in range(nbits):
        bit = 1 << k
        if bit in pivots:
            continue
        sol = bit
        for low in ordered:
            if bin(pivots[low] & sol).count("1") & 1:
                sol |= low
        basis.append(sol)
    return basis


class _EndoSearch:
    """Finds certified idempotent endomorphisms of Coker(N) over F_2."""

    def __init__(self, grid, qring: QuotientRing, budget: Budget):
        self.grid = grid
        self.qring = qring
        self.budget = budget
        self.t = len(grid)
        self.s = len(grid[0]) if grid else 0
        amb = qring.ambient
        gens = [_mv_from_columns([grid[i][j] for i in range(self.t)])
                for j in range(self.s)]
        gens += _relation_vectors(qring, self.t)
        gb = _module_gb(gens, amb, budget)
        key = _mv_key(amb)
        self.reducers = [_mv_as_reducer(g, key) for g in gb]
        self.coords: dict = {}

    def _nf_vec(self, d: dict) -> dict:
        return _mv_reduce(dict(d), self.reducers, self.qring.ambient, self.budget)

    def _canon(self, mat) -> int:
        """Bitmask of the canonical residue of the induced endomorphism."""
        mask = 0
        t = self.t
        for j in range(t):
            v = self._nf_vec({(i, e): c for i in range(t)
                              for e, c in mat[i][j].terms})
            for ck in v:
                coord = (j,) + ck
                if coord not in self.coords:
                    self.coords[coord] = len(self.coords)
                mask ^= 1 << self.coords[coord]
        return mask

    def _matmul(self, A, B):
        amb = self.qring.ambient
        t = self.t
        out = []
        for i in range(t):
            row = []
            for j in range(t):
                acc = amb.zero()
                for k in range(t):
                    a = A[i][k]
                    b = B[k][j]
                    if a.terms and b.terms:
                        acc = acc + a * b
                row.append(self.qring.nf(acc))
            out.append(row)
        return out

    def _endo_basis(self, degree: int):
        """Degree-bounded solutions of Phi * col_j(N) in span(cols, I)."""
        amb = self.qring.ambient
        t, s = self.t, self.s
        monos = _monomials_upto(amb, degree)
        unk = [(i, l, m) for i in range(t) for l in range(t) for m in monos]
        idx = {u: k for k, u in enumerate(unk)}
        rows: dict = {}
        for (i, l, m) in unk:
            k = idx[(i, l, m)]
            self.budget.check_time("endomorphism system")
            for j in range(s):
                e = self.grid[l][j]
                if e.is_zero():
                    continue
                contrib = amb.monomial(m) * e
                v = self._nf_vec({(i, ee): c for ee, c in contrib.terms})
                for ck in v:
                    coord = (j,) + ck
                    rows[coord] = rows.get(coord, 0) ^ (1 << k)
        sols = _nullspace_gf2(rows.values(), len(unk))
        mats = []
        for sol in sols:
            mat = [[amb.zero()] * t for _ in range(t)]
            for u, k in idx.items():
                if (sol >> k) & 1:
                    i, l, m = u
                    mat[i][l] = mat[i][l] + amb.monomial(m)
            mats.append(mat)
        # keep one representative per independent canonical residue
        pivots: dict[int, int] = {}
        keep = []
        for mat in mats:
            mask = self._canon(mat)
            while mask:
                low = mask & (-mask)
                pv = pivots.get(low)
                if pv is None:
                    pivots[low] = mask
                    keep.append(mat)
                    break
                mask ^= pv
        return keep

    def find_idempotent(self):
        """A matrix E with E^2 = E on the cokernel, E != 0, E != identity."""
        amb = self.qring.ambient
        t = self.t
        ident = [[amb.one() if i == j else amb.zero() for j in range(t)]
                 for i in range(t)]
        id_mask = self._canon(ident)
        from itertools import combinations
        for degree in _ENDO_DEGREES:
            self.budget.check_time("idempotent search")
            mats = self._endo_basis(degree)
            B = len(mats)
            singles = [self._canon(m) for m in mats]
            squares = [self._canon(self._matmul(m, m)) for m in mats]
            for k in range(B):
                if squares[k] == singles[k] and singles[k] not in (0, id_mask):
                    return mats[k]
            if B > 64:
                continue
            anti: dict = {}
            for a, b in combinations(range(B), 2):
                self.budget.check_time("idempotent search")
                anti[(a, b)] = (
                    self._canon(self._matmul(mats[a], mats[b]))
                    ^ self._canon(self._matmul(mats[b], mats[a]))
                )
            for size in (2, 3):
                if size == 3 and B > 32:
                    break
                for combo in combinations(range(B), size):
                    m_e = 0
                    m_q = 0
                    for k in combo:
                        m_e ^= singles[k]
                        m_q ^= squares[k]
                    for a, b in combinations(combo, 2):
                        m_q ^= anti[(a, b)]
                    if m_q == m_e and m_e not in (0, id_mask):
                        mat = [[amb.zero()] * t for _ in range(t)]
                        for k in combo:
                            for i in range(t):
                                for j in range(t):
                                    mat[i][j] = mat[i][j] + mats[k][i][j]
                        return mat
        return None


def _idempotent_split(grid, qring: QuotientRing, budget: Budget):
    """Split Coker(grid) along an idempotent endomorphism, or None."""
    t = len(grid)
    if t < 2 or t > _ENDO_MAX_ROWS or qring.ambient.p != 2:
        return None
    try:
        search = _EndoSearch(grid, qring, budget)
        E = search.find_idempotent()
    except BudgetExceeded:
        return None
    if E is None:
        return None
    amb = qring.ambient
    s = len(grid[0]) if grid else 0
    one = amb.one()
    IE = [[qring.nf((one if i == j else amb.zero()) - E[i][j]) for j in range(t)]
          for i in range(t)]
    part1 = [[grid[i][j] for j in range(s)] + [IE[i][j] for j in range(t)]
             for i in range(t)]
    part2 = [[grid[i][j] for j in range(s)] + [E[i][j] for j in range(t)]
             for i in range(t)]
    m1 = prune(PresentedModule(qring, RMatrix(qring, part1)), budget)
    m2 = prune(PresentedModule(qring, RMatrix(qring, part2)), budget)
    if m1.matrix.rows >= t or m2.matrix.rows >= t:
        return None
    return m1, m2


def block_decompose(M: PresentedModule, budget: Budget | None = None) -> list[PresentedModule]:
    """Split a pruned presentation into direct summands, best effort.

    Constant-linear Gaussian elimination sparsifies constant couplings and
    monomial-multiplier eliminations clear the rest; the bipartite
    connectivity of nonzero entries then defines blocks, recursively. A
    presentation that stays connected is attacked with an idempotent
    endomorphism search. Each zero row becomes a 1x0 free block. Blocks
    need not be indecomposable.
    """
    budget = budget or DEFAULT_BUDGET
    qring = M.ring

    def split(grid, depth: int) -> list[tuple[int, list[list[Polynomial]]]]:
        grid = _untangle(grid, qring, budget)
        if not grid:
            return []
        nrows = len(grid)
        ncols = len(grid[0]) if grid[0] else 0
        comps, isolated_rows, _ = _components(grid, range(nrows), range(ncols))
        if len(comps) + len(isolated_rows) <= 1:
            if depth < 6:
                parts = _idempotent_split(grid, qring, budget)
                if parts is not None:
                    out = []
                    for offset, part in enumerate(parts):
                        for lead, piece in split(part.matrix.copy_grid(), depth + 1):
                            out.append((offset, piece))
                    return out
            return [(0, grid)]
        out = []
        for comp_rows, comp_cols in comps:
            sub = [[grid[i][j] for j in comp_cols] for i in comp_rows]
            for lead, piece in split(sub, depth + 1):
                out.append((comp_rows[0], piece))
        for i in isolated_rows:
            out.append((i, [[]]))
        out.sort(key=lambda item: item[0])
        return out

    pieces = split(M.matrix.copy_grid(), 0)
    blocks = []
    for _, piece in pieces:
        blocks.append(PresentedModule(qring, RMatrix(qring, piece, normalize=False)))
    return blocks


# -- signatures ------------------------------------------------------------------------

_SIG_DIRECT_ROWS = 6


@dataclass(frozen=True)
class InvariantSignature:
    """Module invariants: rank plus reduced GBs of the Fitting ideals.

    Fitting ideals are taken in the ambient ring with the relation ideal
    adjoined; trailing unit ideals are trimmed so that presentations of
    different sizes compare correctly. Equal modules have equal
    signatures; distinct signatures certify non-isomorphism."""

    ring_key: tuple
    rank: int
    fitting: tuple[tuple[str, ...], ...]

    def digest(self) -> str:
        blob = repr((self.ring_key, self.rank, self.fitting)).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _gb_of(qring: QuotientRing, gens: list[Polynomial], budget: Budget) -> ReducedGB:
    all_gens = [g for g in gens if not g.is_zero()]
    all_gens += list(qring.gb.basis)
    if not all_gens:
        return ReducedGB(qring.ambient, ())
    return buchberger(IdealGens(qring.ambient, all_gens), budget)


_UNIT_MARK = "unit"


def _fitting_gb_table(M: PresentedModule, budget: Budget) -> list[ReducedGB | str]:
    """Per-k reduced GBs of Fitt_k + I for k = 0..t; unit ideals marked."""
    qring = M.ring
    t, s = M.matrix.rows, M.matrix.cols
    grid = M.matrix.entries
    memo: dict = {}
    table: list[ReducedGB | str] = []
    for k in range(t + 1):
        size = t - k
        if size <= 0:
            table.append(_UNIT_MARK)
            continue
        if size > min(t, s):
            table.append(_gb_of(qring, [], budget))
            continue
        gens = []
        seen = set()
        for m in _all_minors(grid, size, qring, range(t), range(s), budget, memo):
            if m.is_zero():
                continue
            m = m.monic()
            if m.terms not in seen:
                seen.add(m.terms)
                gens.append(m)
        gb = _gb_of(qring, gens, budget)
        table.append(_UNIT_MARK if gb.is_unit_ideal() else gb)
    return table


def _fold_fitting_tables(a, b, qring: QuotientRing, budget: Budget):
    """Fitting table of a direct sum: Fitt_k = sum over i+j=k of products."""
    ta, tb = len(a) - 1, len(b) - 1
    out = []
    for k in range(ta + tb + 1):
        gens: list[Polynomial] = []
        unit = False
        for i in range(max(0, k - tb), min(k, ta) + 1):
            j = k - i
            fa, fb = a[i], b[j]
            if fa == _UNIT_MARK and fb == _UNIT_MARK:
                unit = True
                break
            if fa == _UNIT_MARK:
                gens.extend(fb.basis)
            elif fb == _UNIT_MARK:
                gens.extend(fa.basis)
            else:
                for ga in fa.basis:
                    for gb_ in fb.basis:
                        gens.append(ga * gb_)
        if unit:
            out.append(_UNIT_MARK)
            continue
        budget.check_time("fitting fold")
        gb = _gb_of(qring, gens, budget)
        out.append(_UNIT_MARK if gb.is_unit_ideal() else gb)
    return out


def signature(M: PresentedModule, budget: Budget | None = None) -> InvariantSignature:
    """Rank plus Fitting-ideal GBs; an isomorphism invariant of Coker.

    Large presentations are decomposed into direct-sum blocks first and
    the Fitting ideals are assembled with the direct-sum formula, which
    gives the same canonical answer as the direct computation."""
    budget = budget or DEFAULT_BUDGET
    qring = M.ring
    r = module_rank(M, budget)
    if M.matrix.rows <= _SIG_DIRECT_ROWS:
        table = _fitting_gb_table(M, budget)
    else:
        blocks = block_decompose(M, budget)
        if len(blocks) == 1:
            table = _fitting_gb_table(M, budget)
        else:
            table = _fitting_gb_table(blocks[0], budget)
            for blk in blocks[1:]:
                table = _fold_fitting_tables(table, _fitting_gb_table(blk, budget),
                                             qring, budget)
    while table and table[-1] == _UNIT_MARK:
        table.pop()
    fitting = tuple(
        ("1",) if entry == _UNIT_MARK else tuple(str(g) for g in entry.basis)
        for entry in table
    )
    amb = qring.ambient
    return InvariantSignature(ring_key=(amb.p, amb.names), rank=r, fitting=fitting)
