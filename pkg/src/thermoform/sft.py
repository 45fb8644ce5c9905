"""Subshifts of finite type, locally constant potentials, Birkhoff sums.

A subshift of finite type (SFT) is the space of one-sided symbol sequences
over an alphabet 0..k-1 whose consecutive pairs are allowed by a 0/1
adjacency matrix, together with the left shift.  The metric is
d(x, y) = 2^(-first index where x, y differ), so depth-q cylinders are the
balls of radius 2^(-q) and every separated/spanning construction becomes a
sum over admissible words.  All enumerations are in lexicographic word
order, which makes every floating-point reduction deterministic.

Standard fixtures used throughout the docs and tests:

    FULL2  - full shift on {0,1}           adjacency [[1,1],[1,1]]
    GOLDEN - golden-mean shift (no "11")   adjacency [[1,1],[1,0]]
    CYCLE2 - two-state single cycle        adjacency [[0,1],[1,0]]
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    CapExceededError,
    EmptyRowOrColumnError,
    InadmissibleCycleError,
    InadmissibleWordError,
    NotABijectionError,
    RangeMismatchError,
    WordTooShortError,
)

DEFAULT_CAP = 1 << 26

Word = tuple[int, ...]


def enumeration_cap() -> int:
    """Active word cap: THERMOFORM_CAP env var or the 2^26 default."""
    raw = os.environ.get("THERMOFORM_CAP")
    if raw is None:
        return DEFAULT_CAP
    return int(raw)


# ---------------------------------------------------------------------------
# Core types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Sft:
    """A one-sided subshift of finite type on symbols 0..alphabet_size-1."""

    alphabet_size: int
    adjacency: np.ndarray
    irreducible: bool
    primitive: bool

    def __post_init__(self):
        self.adjacency.setflags(write=False)

    def successors(self, s: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[s])

    def same_system(self, other: "Sft") -> bool:
        return (self.alphabet_size == other.alphabet_size
                and np.array_equal(self.adjacency, other.adjacency))

    def __eq__(self, other):
        return isinstance(other, Sft) and self.same_system(other)

    def __hash__(self):
        return hash((self.alphabet_size, self.adjacency.tobytes()))


def validate_sft(alphabet_size: int, adjacency) -> Sft:
    """Build an Sft, checking the graph and computing its flags.

    Raises EmptyRowOrColumnError when some symbol has no successor or no
    predecessor (the shift space would not be well defined).  Reducibility
    is a flag, not an error; spectral operations downstream reject it.
    """
    a = np.asarray(adjacency)
    if a.shape != (alphabet_size, alphabet_size):
        raise ValueError(f"adjacency must be {alphabet_size}x{alphabet_size}, got {a.shape}")
    if not np.isin(a, (0, 1)).all():
        raise ValueError("adjacency entries must be 0 or 1")
    a = a.astype(np.int8)
    for i in range(alphabet_size):
        if not a[i].any():
            raise EmptyRowOrColumnError(f"row {i} empty: symbol {i} has no successor")
    for j in range(alphabet_size):
        if not a[:, j].any():
            raise EmptyRowOrColumnError(f"column {j} empty: symbol {j} has no predecessor")
    from ._numeric import strongly_connected

    irreducible = strongly_connected(a)
    primitive = irreducible and _is_primitive(a)
    return Sft(alphabet_size, a, irreducible, primitive)


def _is_primitive(a: np.ndarray) -> bool:
    # Wielandt bound: a primitive k x k matrix has A^(k^2-2k+2) > 0.
    k = a.shape[0]
    bound = max(k * k - 2 * k + 2, 1)
    power = np.eye(k, dtype=bool)
    ab = a > 0
    for _ in range(bound):
        power = power @ ab
        if power.all():
            return True
    return False


FULL2 = validate_sft(2, [[1, 1], [1, 1]])
GOLDEN = validate_sft(2, [[1, 1], [1, 0]])
CYCLE2 = validate_sft(2, [[0, 1], [1, 0]])


# ---------------------------------------------------------------------------
# Words
# ---------------------------------------------------------------------------

def word_to_str(word: Sequence[int], alphabet_size: int) -> str:
    """Render a word as symbols without separators (k <= 10), else commas."""
    if alphabet_size <= 10:
        return "".join(str(s) for s in word)
    return ",".join(str(s) for s in word)


def word_from_str(text: str, alphabet_size: int) -> Word:
    if alphabet_size <= 10:
        return tuple(int(c) for c in text)
    return tuple(int(c) for c in text.split(","))


def is_admissible(sft: Sft, word: Sequence[int]) -> bool:
    a = sft.adjacency
    k = sft.alphabet_size
    if any(s < 0 or s >= k for s in word):
        return False
    return all(a[word[i], word[i + 1]] for i in range(len(word) - 1))


def count_words(sft: Sft, n: int) -> int:
    """Exact number of admissible n-words, 1^T A^(n-1) 1 in integer arithmetic."""
    if n < 1:
        raise ValueError("n must be >= 1")
    a = sft.adjacency.astype(object)
    vec = np.ones(sft.alphabet_size, dtype=object)
    for _ in range(n - 1):
        vec = a @ vec
    return int(np.sum(vec))


def enumerate_words(sft: Sft, n: int, cap: int | None = None) -> list[Word]:
    """All admissible n-words in lexicographic order.

    Raises CapExceededError if the exact count (from the matrix power)
    exceeds the enumeration cap.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    cap = enumeration_cap() if cap is None else cap
    if count_words(sft, n) > cap:
        raise CapExceededError(f"{count_words(sft, n)} {n}-words exceed cap {cap}")
    succ = [tuple(int(t) for t in sft.successors(s)) for s in range(sft.alphabet_size)]
    words: list[Word] = []

    def extend(prefix: Word):
        if len(prefix) == n:
            words.append(prefix)
            return
        for t in succ[prefix[-1]]:
            extend(prefix + (t,))

    if n == 1:
        return [(s,) for s in range(sft.alphabet_size)]
    for s in range(sft.alphabet_size):
        extend((s,))
    return words


# ---------------------------------------------------------------------------
# Locally constant potentials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LocallyConstantPotential:
    """A real function of sequences depending on the first `range` symbols.

    `words` lists the admissible range-words in lexicographic order and
    `table` holds the value on the corresponding cylinder.
    """

    sft: Sft
    range: int
    words: tuple[Word, ...]
    table: np.ndarray
    label: str = ""
    _index: dict = field(repr=False, default_factory=dict)

    def __post_init__(self):
        self.table.setflags(write=False)
        object.__setattr__(self, "_index", {w: i for i, w in enumerate(self.words)})

    def value(self, word: Sequence[int]) -> float:
        key = tuple(word)
        if key not in self._index:
            raise InadmissibleWordError(f"word {key} not an admissible {self.range}-word")
        return float(self.table[self._index[key]])

    def min(self) -> float:
        return float(self.table.min())

    def max(self) -> float:
        return float(self.table.max())

    def is_constant(self) -> bool:
        return bool(np.all(self.table == self.table[0]))

    def with_label(self, label: str) -> "LocallyConstantPotential":
        return LocallyConstantPotential(self.sft, self.range, self.words,
                                        self.table.copy(), label)


def locally_constant(sft: Sft, r: int, values, label: str = "") -> LocallyConstantPotential:
    """Build a potential from a mapping {word (tuple or string): value}.

    The mapping must cover every admissible r-word and nothing else, and
    all values must be finite.
    """
    if r < 1:
        raise ValueError("range must be >= 1")
    words = tuple(enumerate_words(sft, r))
    normalized = {}
    for key, val in dict(values).items():
        word = word_from_str(key, sft.alphabet_size) if isinstance(key, str) else tuple(key)
        normalized[word] = float(val)
    missing = [w for w in words if w not in normalized]
    if missing:
        raise ValueError(f"missing values for admissible words, e.g. {missing[0]}")
    extra = set(normalized) - set(words)
    if extra:
        raise InadmissibleWordError(f"values given for inadmissible words, e.g. {sorted(extra)[0]}")
    table = np.array([normalized[w] for w in words], dtype=float)
    if not np.isfinite(table).all():
        raise ValueError("potential values must be finite")
    return LocallyConstantPotential(sft, r, words, table, label)


def range1_potential(sft: Sft, values: Sequence[float], label: str = "") -> LocallyConstantPotential:
    """Range-1 potential from per-symbol values."""
    if len(values) != sft.alphabet_size:
        raise ValueError("need one value per symbol")
    return locally_constant(sft, 1, {(s,): v for s, v in enumerate(values)}, label)


def constant_potential(sft: Sft, c: float, label: str = "") -> LocallyConstantPotential:
    return range1_potential(sft, [c] * sft.alphabet_size, label or f"const {c}")


def linear_combination(coeffs: Sequence[float],
                       pots: Sequence[LocallyConstantPotential],
                       label: str = "") -> LocallyConstantPotential:
    """Pointwise sum(c_i * pot_i); potentials must share system and range."""
    if len(coeffs) != len(pots) or not pots:
        raise ValueError("need one coefficient per potential")
    base = pots[0]
    for p in pots[1:]:
        if not p.sft.same_system(base.sft) or p.range != base.range:
            raise RangeMismatchError("potentials must share system and range")
    table = np.zeros_like(base.table)
    for c, p in zip(coeffs, pots):
        table = table + float(c) * p.table
    return LocallyConstantPotential(base.sft, base.range, base.words, table, label)


# ---------------------------------------------------------------------------
# Birkhoff sums
# ---------------------------------------------------------------------------

def cylinder_birkhoff(pot: LocallyConstantPotential, word: Sequence[int], n: int) -> float:
    """S_n of the potential on the cylinder of `word`; exact, not estimated.

    The word must have length n + range - 1 so all n windows fit.
    """
    w = tuple(word)
    r = pot.range
    if n < 1:
        raise ValueError("n must be >= 1")
    if len(w) < n + r - 1:
        raise WordTooShortError(f"need length {n + r - 1}, got {len(w)}")
    if len(w) != n + r - 1:
        raise WordTooShortError(f"word length must be exactly {n + r - 1}")
    if not is_admissible(pot.sft, w):
        raise InadmissibleWordError(f"word {w} not admissible")
    return float(sum(pot.value(w[i:i + r]) for i in range(n)))


# ---------------------------------------------------------------------------
# Cycles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Cycle:
    """A closed admissible path, not a repetition of a shorter cycle."""

    states: Word
    period: int

    def rotated_min(self) -> "Cycle":
        rots = [self.states[i:] + self.states[:i] for i in range(self.period)]
        return Cycle(min(rots), self.period)


def make_cycle(sft: Sft, states: Sequence[int]) -> Cycle:
    s = tuple(int(x) for x in states)
    p = len(s)
    if p < 1:
        raise InadmissibleCycleError("empty cycle")
    a = sft.adjacency
    for i in range(p):
        if not a[s[i], s[(i + 1) % p]]:
            raise InadmissibleCycleError(f"transition {s[i]}->{s[(i + 1) % p]} forbidden")
    for d in range(1, p):
        if p % d == 0 and s == s[:d] * (p // d):
            raise InadmissibleCycleError("cycle is a repetition of a shorter cycle")
    return Cycle(s, p)


def periodic_birkhoff(pot: LocallyConstantPotential, cycle: Cycle) -> float:
    """Birkhoff sum of one period along the periodic orbit of the cycle.

    Windows wrap around the period, so the result is exact for the periodic
    point the cycle defines.
    """
    s = cycle.states
    p = cycle.period
    a = pot.sft.adjacency
    for i in range(p):
        if not a[s[i], s[(i + 1) % p]]:
            raise InadmissibleCycleError(f"cycle {s} not admissible in the potential's system")
    r = pot.range
    total = 0.0
    for i in range(p):
        window = tuple(s[(i + j) % p] for j in range(r))
        total += pot.value(window)
    return float(total)


def enumerate_simple_cycles(sft: Sft, max_period: int, cap: int | None = None) -> list[Cycle]:
    """All simple cycles (no repeated state) up to max_period, one per rotation.

    Cycles are reported with their minimal state first and sorted by
    (period, states).
    """
    if max_period < 1:
        raise ValueError("max_period must be >= 1")
    cap = enumeration_cap() if cap is None else cap
    k = sft.alphabet_size
    succ = [tuple(int(t) for t in sft.successors(s)) for s in range(k)]
    found: list[Cycle] = []

    def search(start: int, path: list[int], on_path: set[int]):
        if len(found) > cap:
            raise CapExceededError("cycle enumeration exceeded cap")
        u = path[-1]
        for v in succ[u]:
            if v == start and 1 <= len(path) <= max_period:
                found.append(Cycle(tuple(path), len(path)))
            elif v > start and v not in on_path and len(path) < max_period:
                on_path.add(v)
                path.append(v)
                search(start, path, on_path)
                path.pop()
                on_path.discard(v)

    for start in range(k):
        search(start, [start], {start})
    return sorted(found, key=lambda c: (c.period, c.states))


# ---------------------------------------------------------------------------
# Recoding and relabeling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RecodedSystem:
    """Higher-block presentation: new symbols are admissible m-words."""

    sft: Sft
    potentials: tuple[LocallyConstantPotential, ...]
    blocks: tuple[Word, ...]
    block_length: int

    def block_index(self, word: Sequence[int]) -> int:
        return self.blocks.index(tuple(word))


def higher_block_recode(sft: Sft, potentials: Sequence[LocallyConstantPotential],
                        m: int, cap: int | None = None) -> RecodedSystem:
    """Recode to the m-block presentation; all potentials become range 1.

    New alphabet = admissible m-words in lexicographic order; u -> v is an
    edge iff u and v overlap in m-1 symbols.  Each potential keeps the value
    of its original window at the start of the block.  Pressures computed on
    the recoded system equal the originals (a tested invariant, not an
    assumption here).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    max_range = max((p.range for p in potentials), default=1)
    if m < max_range:
        raise RangeMismatchError(f"m={m} below max potential range {max_range}")
    for p in potentials:
        if not p.sft.same_system(sft):
            raise RangeMismatchError("potential lives on a different system")
    if m == 1:
        blocks = tuple((s,) for s in range(sft.alphabet_size))
        return RecodedSystem(sft, tuple(potentials), blocks, 1)
    blocks = tuple(enumerate_words(sft, m, cap=cap))
    nb = len(blocks)
    adj = np.zeros((nb, nb), dtype=np.int8)
    index = {b: i for i, b in enumerate(blocks)}
    for i, u in enumerate(blocks):
        tail = u[1:]
        for t in sft.successors(u[-1]):
            v = tail + (int(t),)
            j = index.get(v)
            if j is not None:
                adj[i, j] = 1
    new_sft = validate_sft(nb, adj)
    new_pots = []
    for p in potentials:
        table = np.array([p.value(b[:p.range]) for b in blocks], dtype=float)
        words = tuple((i,) for i in range(nb))
        new_pots.append(LocallyConstantPotential(new_sft, 1, words, table, p.label))
    return RecodedSystem(new_sft, tuple(new_pots), blocks, m)


def common_range1(sft: Sft, potentials: Sequence[LocallyConstantPotential]) -> RecodedSystem:
    """Recode so every potential has range 1 (identity when already range 1)."""
    m = max((p.range for p in potentials), default=1)
    return higher_block_recode(sft, potentials, m)


def permute_symbols(sft: Sft, potentials: Sequence[LocallyConstantPotential],
                    permutation: Sequence[int]):
    """Relabel symbols by a bijection; returns (Sft, list of potentials)."""
    k = sft.alphabet_size
    perm = [int(p) for p in permutation]
    if sorted(perm) != list(range(k)):
        raise NotABijectionError(f"{perm} is not a bijection on 0..{k - 1}")
    adj = np.zeros_like(sft.adjacency)
    for i in range(k):
        for j in range(k):
            adj[perm[i], perm[j]] = sft.adjacency[i, j]
    new_sft = validate_sft(k, adj)
    new_pots = []
    for p in potentials:
        values = {tuple(perm[s] for s in w): p.table[i] for i, w in enumerate(p.words)}
        new_pots.append(locally_constant(new_sft, p.range, values, p.label))
    return new_sft, new_pots


# ---------------------------------------------------------------------------
# Grouped cylinder enumeration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SumGroups:
    """Admissible words of one length, grouped by (last symbol, Birkhoff sums).

    `sums` has one column per tracked potential (full sums over all `length`
    positions); `counts` is the exact number of words in each group.  The
    grouping is lossless for every estimator here because the summands are
    constant on each group.
    """

    length: int
    states: np.ndarray
    sums: np.ndarray
    counts: np.ndarray


def iter_grouped_sums(sft: Sft, tables: Sequence[np.ndarray], max_length: int,
                      cap: int | None = None) -> Iterator[SumGroups]:
    """Yield SumGroups for lengths 1..max_length over range-1 value tables.

    Groups collapse words sharing (last symbol, sum vector); for commensurate
    potentials this turns the exponential word count into a polynomial group
    count, and it is exact in all cases.  Raises CapExceededError when an
    extension step would exceed the word cap.
    """
    cap = enumeration_cap() if cap is None else cap
    k = sft.alphabet_size
    m = len(tables)
    vals = np.array([np.asarray(t, dtype=float) for t in tables]).reshape(m, k) \
        if m else np.zeros((0, k))
    succ = [np.flatnonzero(sft.adjacency[s]).astype(np.int64) for s in range(k)]

    states = np.arange(k, dtype=np.int64)
    sums = vals.T.copy()          # (k, m)
    counts = np.ones(k, dtype=np.uint64)
    states, sums, counts = _collapse_groups(states, sums, counts)
    yield SumGroups(1, states, sums, counts)

    for length in range(2, max_length + 1):
        parts_s, parts_x, parts_c = [], [], []
        total = 0
        bounds = np.searchsorted(states, np.arange(k + 1))
        for s in range(k):
            lo, hi = bounds[s], bounds[s + 1]
            if lo == hi:
                continue
            for t in succ[s]:
                total += hi - lo
                if total > cap:
                    raise CapExceededError(
                        f"group extension at length {length} exceeds cap {cap}")
                parts_s.append(np.full(hi - lo, t, dtype=np.int64))
                parts_x.append(sums[lo:hi] + vals[:, t])
                parts_c.append(counts[lo:hi])
        states = np.concatenate(parts_s)
        sums = np.concatenate(parts_x) if m else np.zeros((len(states), 0))
        counts = np.concatenate(parts_c)
        states, sums, counts = _collapse_groups(states, sums, counts)
        yield SumGroups(length, states, sums, counts)


def _collapse_groups(states, sums, counts):
    m = sums.shape[1]
    keys = tuple(sums[:, j] for j in range(m - 1, -1, -1)) + (states,)
    order = np.lexsort(keys)
    states = states[order]
    sums = sums[order]
    counts = counts[order]
    if len(states) == 0:
        return states, sums, counts
    new = np.ones(len(states), dtype=bool)
    same_state = states[1:] == states[:-1]
    same_sums = np.ones(len(states) - 1, dtype=bool)
    for j in range(m):
        same_sums &= sums[1:, j] == sums[:-1, j]
    new[1:] = ~(same_state & same_sums)
    idx = np.flatnonzero(new)
    out_counts = np.add.reduceat(counts, idx)
    return states[idx], sums[idx], out_counts


def grouped_sums(sft: Sft, tables: Sequence[np.ndarray], length: int,
                 cap: int | None = None) -> SumGroups:
    """SumGroups at a single length (the last element of the iteration)."""
    last = None
    for groups in iter_grouped_sums(sft, tables, length, cap=cap):
        last = groups
    assert last is not None
    return last
