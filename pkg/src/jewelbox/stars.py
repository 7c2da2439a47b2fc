"""Directions of a rose, ideal edges, star graphs and the dot product / norm.

Directions are integers 0..2n-1: ``2(i-1)`` is the oriented petal e_i and
``2(i-1)+1`` its reverse.  The bar involution is ``d ^ 1``.  The letter ``+i``
of a petal word travels along e_i and ``-i`` along the reverse.  Subsets of
directions are bitmasks.

A dot source is a stack of symmetric 2n x 2n integer matrices, one per norm
coordinate; ``(X.Y)_c`` sums entry ``[x, y]`` over x in X and y in Y.  Norm
vectors are plain tuples, so Python's tuple order is the lexicographic order.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np

from .freegroup import Marking, class_letters, cyclic_reduce, generate_W0


class EmptyWord(ValueError):
    pass


class Overlap(ValueError):
    pass


class Degenerate(ValueError):
    pass


class NotAPartition(ValueError):
    pass


class InsufficientWords(RuntimeError):
    """A truncated norm comparison came out tied."""


class NotAnIdealEdge(ValueError):
    pass


def bar(d: int) -> int:
    return d ^ 1


def petal_of(d: int) -> int:
    return d // 2 + 1


def letter_dir(x: int) -> int:
    return 2 * (x - 1) if x > 0 else 2 * (-x - 1) + 1


def dir_letter(d: int) -> int:
    return petal_of(d) if d % 2 == 0 else -petal_of(d)


def dir_name(d: int) -> str:
    return ("e" if d % 2 == 0 else "E") + str(petal_of(d))


def parse_dir(text: str) -> int:
    text = text.strip()
    if len(text) < 2 or text[0] not in "eE":
        raise ValueError(f"bad direction {text!r}")
    i = int(text[1:])
    return 2 * (i - 1) + (text[0] == "E")


def dirs_of(mask: int) -> list[int]:
    return [d for d in range(mask.bit_length()) if mask >> d & 1]


def mask_from(dirs) -> int:
    m = 0
    for d in dirs:
        m |= 1 << d
    return m


def full_mask(n: int) -> int:
    return (1 << (2 * n)) - 1


def bar_mask(mask: int) -> int:
    even = mask & 0x5555555555555555
    odd = mask & 0xAAAAAAAAAAAAAAAA
    return (even << 1) | (odd >> 1)


def split_petals(side: int, n: int) -> list[int]:
    """Petals i with e_i and its reverse on different sides."""
    return [i for i in range(1, n + 1) if (side >> (2 * i - 2) & 1) != (side >> (2 * i - 1) & 1)]


def splits(side: int, i: int) -> bool:
    return (side >> (2 * i - 2) & 1) != (side >> (2 * i - 1) & 1)


@dataclass(frozen=True, order=True)
class IdealEdge:
    side: int  # the side containing direction 0 (e_1)
    n: int

    def __post_init__(self):
        full = full_mask(self.n)
        s = self.side & full
        if not s & 1:
            s = full & ~s
        object.__setattr__(self, "side", s)
        if bin(s).count("1") < 2 or bin(full & ~s).count("1") < 2:
            raise NotAnIdealEdge("each side needs at least two directions")
        if not split_petals(s, self.n):
            raise NotAnIdealEdge("partition splits no petal")

    @classmethod
    def try_make(cls, side: int, n: int) -> "IdealEdge | None":
        try:
            return cls(side, n)
        except NotAnIdealEdge:
            return None

    @property
    def other(self) -> int:
        return full_mask(self.n) & ~self.side

    def sides(self) -> tuple[int, int]:
        return (self.side, self.other)

    def splits(self, i: int) -> bool:
        return splits(self.side, i)

    def split_petals(self) -> list[int]:
        return split_petals(self.side, self.n)

    def __str__(self):
        return ",".join(dir_name(d) for d in dirs_of(self.side)) + "|~"

    @classmethod
    def parse(cls, text: str, n: int) -> "IdealEdge":
        left = text.split("|")[0]
        return cls(mask_from(parse_dir(t) for t in left.split(",") if t.strip()), n)


def compatible(a: IdealEdge, b: IdealEdge) -> bool:
    return any(x & y == 0 for x in a.sides() for y in b.sides())


def star_edges(letters: Sequence[int]) -> Counter:
    """Edge multiset of the star graph of a cyclic petal word."""
    w = cyclic_reduce(letters)
    if not w:
        raise EmptyWord("star graph of the trivial class")
    k = len(w)
    out: Counter = Counter()
    for i in range(k):
        a = letter_dir(w[i])
        b = bar(letter_dir(w[(i + 1) % k]))
        out[(min(a, b), max(a, b))] += 1
    return out


@dataclass(frozen=True)
class StarGraph:
    n: int
    edges: tuple[tuple[tuple[int, int], int], ...]

    @classmethod
    def of(cls, letters: Sequence[int], n: int) -> "StarGraph":
        return cls(n, tuple(sorted(star_edges(letters).items())))

    @property
    def num_edges(self) -> int:
        return sum(c for _, c in self.edges)

    def crossing(self, x: int, y: int) -> int:
        """Edges with one end in X and the other in Y (X, Y disjoint)."""
        tot = 0
        for (a, b), c in self.edges:
            if (x >> a & 1 and y >> b & 1) or (x >> b & 1 and y >> a & 1):
                tot += c
        return tot

    def to_json(self) -> list:
        return [[dir_name(a), dir_name(b), c] for (a, b), c in self.edges]


def star_graph(letters: Sequence[int], n: int) -> StarGraph:
    return StarGraph.of(letters, n)


def star_matrix(letters: Sequence[int], n: int) -> np.ndarray:
    mat = np.zeros((2 * n, 2 * n), dtype=np.int64)
    for (a, b), c in star_edges(letters).items():
        mat[a, b] += c
        mat[b, a] += c
    return mat


class DotSource:
    """Base class: ``tensor[c]`` is the coordinate-c matrix."""

    n: int
    tensor: np.ndarray

    def can_extend(self) -> bool:
        return False

    def extend(self) -> None:
        raise InsufficientWords("coordinates cannot be extended")

    @property
    def num_coords(self) -> int:
        return self.tensor.shape[0]

    def describe(self) -> dict:
        return {"kind": type(self).__name__, "coords": int(self.num_coords)}


class MarkingDots(DotSource):
    """Dots from star graphs of marked images of conjugacy classes.

    Coordinate 0 aggregates the W0 classes, then one coordinate per class of
    cyclic length <= budget in shortlex order.
    """

    def __init__(self, marking: Marking, budget: int = 2, max_budget: int | None = None):
        self.marking = marking
        self.n = marking.n
        self.budget = 0
        self.max_budget = max_budget if max_budget is not None else max(budget, default_budget(marking))
        agg = np.zeros((2 * self.n, 2 * self.n), dtype=np.int64)
        for w in generate_W0(self.n):
            agg += star_matrix(marking.apply(w.letters), self.n)
        self._mats = [agg]
        self.tensor = agg[None]
        self._grow(budget)

    def _grow(self, budget: int) -> None:
        classes = class_letters(self.n, budget)
        have = len(self._mats) - 1
        for w in classes[have:]:
            self._mats.append(star_matrix(self.marking.apply(w), self.n))
        self.budget = budget
        self.tensor = np.stack(self._mats)

    def can_extend(self) -> bool:
        return self.budget < self.max_budget

    def extend(self) -> None:
        if not self.can_extend():
            raise InsufficientWords(f"norms tie through word length {self.budget}")
        self._grow(self.budget + 1)

    def describe(self) -> dict:
        return {"kind": "marking", "marking": self.marking.to_strings(), "budget": self.budget}


def default_budget(marking: Marking) -> int:
    """Four times the longest inverse image, so the distinguishing words fit."""
    longest = max(len(w) for w in marking.inverse().images)
    return max(4, 4 * longest)


class DotData(DotSource):
    """Synthetic dots: random positive weights on direction pairs.

    Weights are symmetric and invariant under barring both directions, so
    |e| = |ebar| as for genuine star graphs.
    """

    def __init__(self, n: int, rng: np.random.Generator, coords: int = 3, high: int = 1000):
        self.n = n
        size = 2 * n
        t = np.zeros((coords, size, size), dtype=np.int64)
        for c in range(coords):
            for a in range(size):
                for b in range(a + 1, size):
                    ba, bb = sorted((bar(a), bar(b)))
                    if (ba, bb) < (a, b):
                        t[c, a, b] = t[c, ba, bb]
                    else:
                        t[c, a, b] = rng.integers(1, high + 1)
                    t[c, b, a] = t[c, a, b]
        self.tensor = t

    @classmethod
    def from_tensor(cls, tensor: np.ndarray) -> "DotData":
        obj = cls.__new__(cls)
        obj.n = tensor.shape[1] // 2
        obj.tensor = np.asarray(tensor, dtype=np.int64)
        return obj

    def describe(self) -> dict:
        return {"kind": "dotdata", "coords": int(self.num_coords)}


def _chi(mask: int, n: int) -> np.ndarray:
    return np.array([(mask >> d) & 1 for d in range(2 * n)], dtype=np.int64)


def dot(x: int, y: int, src: DotSource) -> tuple[int, ...]:
    if x & y:
        raise Overlap("dot product of overlapping direction sets")
    v = np.einsum("cij,i,j->c", src.tensor, _chi(x, src.n), _chi(y, src.n))
    return tuple(int(a) for a in v)


def norm(x: int, src: DotSource) -> tuple[int, ...]:
    full = full_mask(src.n)
    if x == 0 or x & full == full:
        raise Degenerate("norm of the empty or full direction set")
    return dot(x, full & ~x, src)


def dir_norm(d: int, src: DotSource) -> tuple[int, ...]:
    return norm(1 << d, src)


def compare_sets(x: int, y: int, src: DotSource) -> int:
    """Sign of |X| - |Y|, extending the word list on ties when the source allows."""
    while True:
        a, b = norm(x, src), norm(y, src)
        if a != b:
            return 1 if a > b else -1
        if not src.can_extend():
            raise InsufficientWords(
                f"|{dirs_of(x)}| and |{dirs_of(y)}| agree on all {src.num_coords} coordinates"
            )
        src.extend()


def is_ascending_for(alpha: IdealEdge, i: int, src: DotSource) -> bool:
    if not alpha.splits(i):
        return False
    return compare_sets(alpha.side, 1 << (2 * i - 2), src) > 0


def is_ascending(alpha: IdealEdge, src: DotSource) -> bool:
    return any(is_ascending_for(alpha, i, src) for i in alpha.split_petals())


def key_lemma_residual(x: int, y: int, z: int, w: int, src: DotSource) -> tuple[int, ...]:
    """(|X+Z| + |Y+Z|) - (|X| + |Y| + 2 Z.W) for a partition X, Y, Z, W of the directions."""
    full = full_mask(src.n)
    if x & y or x & z or x & w or y & z or y & w or z & w or (x | y | z | w) != full:
        raise NotAPartition("sets must partition the directions")

    def nrm(s):
        # |S| of the empty or full set is zero
        if s == 0 or s == full:
            return np.zeros(src.num_coords, dtype=np.int64)
        return np.array(norm(s, src))

    zw = np.array(dot(z, w, src)) if z and w else np.zeros(src.num_coords, dtype=np.int64)
    res = nrm(x | z) + nrm(y | z) - nrm(x) - nrm(y) - 2 * zw
    return tuple(int(a) for a in res)


def key_lemma_residuals(labels: np.ndarray, src: DotSource) -> np.ndarray:
    """Batched key_lemma_residual.

    ``labels`` has shape (N, 2n); entry d is 0, 1, 2 or 3 as direction d lies in
    X, Y, Z or W.  Returns an (N, num_coords) integer array.
    """
    labels = np.asarray(labels)
    if labels.ndim != 2 or labels.shape[1] != 2 * src.n or labels.min() < 0 or labels.max() > 3:
        raise NotAPartition("labels must assign each direction to one of four sets")
    flat = src.tensor.reshape(src.num_coords, -1).T  # (2n*2n, C)
    ind = [(labels == k).astype(np.int64) for k in range(4)]

    def pair(a, b):
        return (a[:, :, None] * b[:, None, :]).reshape(len(a), -1) @ flat

    def cut(a):
        return pair(a, 1 - a)

    x, y, z, w = ind
    return cut(x + z) + cut(y + z) - cut(x) - cut(y) - 2 * pair(z, w)


# ---- witness words separating norms -----------------------------------------


@dataclass(frozen=True)
class Witness:
    word: tuple[int, ...]  # petal letters
    method: str  # "case", "shape" or "search"
    values: tuple[int, int]

    def __str__(self):
        from .freegroup import format_letters

        return format_letters(self.word)


def _side_of(obj, n) -> int:
    return (1 << obj) if isinstance(obj, int) else obj.side


def _coord(word, side, n) -> int:
    return StarGraph.of(word, n).crossing(side, full_mask(n) & ~side)


def _word(*dirs) -> tuple[int, ...] | None:
    letters = tuple(dir_letter(d) for d in dirs)
    if cyclic_reduce(letters) != letters:
        return None
    return letters


def _check(word, a, b, n, method):
    if word is None:
        return None
    va, vb = _coord(word, _side_of(a, n), n), _coord(word, _side_of(b, n), n)
    if va != vb:
        return Witness(word, method, (va, vb))
    return None


def _case_words(a, b, n):
    """Candidate words in the order the case analysis produces them."""
    if isinstance(a, int) and isinstance(b, int):
        yield _word(a)
        return
    if isinstance(a, int) or isinstance(b, int):
        e, alpha = (a, b) if isinstance(a, int) else (b, a)
        pe = petal_of(e)
        if not alpha.splits(pe):
            yield _word(e)
            return
        others = [i for i in alpha.split_petals() if i != pe]
        for f in others:
            for fd in (2 * f - 2, 2 * f - 1):
                yield _word(e, fd)
        if not others:
            a_side = alpha.side
            unsplit = [i for i in range(1, n + 1) if i != pe]
            for f in unsplit:
                for h in unsplit:
                    fd, hd = 2 * f - 2, 2 * h - 2
                    if (a_side >> fd & 1) != (a_side >> hd & 1):
                        yield _word(fd, hd)
        return
    alpha, beta = a, b
    sa, sb = set(alpha.split_petals()), set(beta.split_petals())
    if sa != sb:
        for i in sorted(sa ^ sb):
            yield _word(2 * i - 2)
        return
    split = sa
    full = full_mask(n)

    def is_split(d):
        return petal_of(d) in split

    for A in alpha.sides():
        for B in beta.sides():
            both, a_only, b_only = A & B, A & ~B, B & ~A
            if not (both and a_only and b_only):
                continue
            for e in dirs_of(both):
                for f in dirs_of(a_only):
                    if is_split(e) == is_split(f):
                        yield _word(e, f)
                    elif is_split(e):
                        for z in dirs_of(b_only):
                            if is_split(z):
                                yield _word(e, z)
                            else:
                                yield _word(f, e, z, bar(e))
                    else:
                        rest = full & ~(A | B)
                        for z in dirs_of(a_only):
                            if z != f:
                                yield _word(e, f, bar(z))
                        for z in dirs_of(rest):
                            yield _word(e, f, z, bar(f))


def _shape_words(n):
    dirs = range(2 * n)
    for d in dirs:
        yield _word(d)
    for d, e in product(dirs, repeat=2):
        yield _word(d, e)
    for d, e, f in product(dirs, repeat=3):
        yield _word(d, e, f)
        yield _word(e, d, f, bar(d))
        yield _word(d, e, f, bar(e))


def distinct_norms_witness(a, b, n: int) -> Witness | None:
    """A cyclic petal word on which |a| and |b| differ.

    ``a`` and ``b`` are directions (ints) or ideal edges.  Returns None for a
    direction and its reverse, whose norms agree.  The coordinate of the class
    whose marked image is the returned word does not depend on the marking.
    """
    if isinstance(a, int) and isinstance(b, int) and petal_of(a) == petal_of(b):
        return None
    if isinstance(a, IdealEdge) and isinstance(b, IdealEdge) and a == b:
        return None
    for w in _case_words(a, b, n):
        hit = _check(w, a, b, n, "case")
        if hit:
            return hit
    for w in _shape_words(n):
        hit = _check(w, a, b, n, "shape")
        if hit:
            return hit
    for length in range(1, 7):
        for letters in class_letters(n, length):
            if len(letters) == length:
                hit = _check(letters, a, b, n, "search")
                if hit:
                    return hit
    return None
