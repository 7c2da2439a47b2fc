"""Words in the free group F_n, conjugacy classes, and markings of roses.

Letters are signed generator indices: ``i`` stands for x_i and ``-i`` for its
inverse.  The string format used in JSON payloads and on the command line
writes x_1, x_2, ... as ``a``, ``b``, ... and their inverses as ``A``, ``B``.
"""

from __future__ import annotations

import string
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence


class IndexOutOfRange(ValueError):
    pass


class NotAnAutomorphism(ValueError):
    pass


def letter_key(letter: int) -> tuple[int, bool]:
    # magnitude first, then x_i before x_i^-1
    return (abs(letter), letter < 0)


def _check_letters(letters: Sequence[int], n: int) -> None:
    for x in letters:
        if x == 0 or abs(x) > n:
            raise IndexOutOfRange(f"letter {x} out of range for rank {n}")


def free_reduce(letters: Iterable[int]) -> tuple[int, ...]:
    out: list[int] = []
    for x in letters:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def cyclic_reduce(letters: Sequence[int]) -> tuple[int, ...]:
    """Strip conjugating pairs from a freely reduced word."""
    w = free_reduce(letters)
    i, j = 0, len(w) - 1
    while i < j and w[i] == -w[j]:
        i += 1
        j -= 1
    return w[i:j + 1]


def canonical_rotation(letters: Sequence[int]) -> tuple[int, ...]:
    w = cyclic_reduce(letters)
    if not w:
        return w
    best = w
    best_key = [letter_key(x) for x in w]
    for r in range(1, len(w)):
        rot = w[r:] + w[:r]
        key = [letter_key(x) for x in rot]
        if key < best_key:
            best, best_key = rot, key
    return best


def parse_letters(text: str) -> tuple[int, ...]:
    out = []
    for ch in text:
        if ch in string.ascii_lowercase:
            out.append(ord(ch) - ord("a") + 1)
        elif ch in string.ascii_uppercase:
            out.append(-(ord(ch) - ord("A") + 1))
        elif ch in " ,.":
            continue
        else:
            raise ValueError(f"bad letter {ch!r} in word {text!r}")
    return tuple(out)


def format_letters(letters: Iterable[int]) -> str:
    return "".join(
        chr(ord("a") + x - 1) if x > 0 else chr(ord("A") - x - 1) for x in letters
    )


@dataclass(frozen=True)
class Word:
    letters: tuple[int, ...]
    n: int

    def __post_init__(self):
        _check_letters(self.letters, self.n)
        if free_reduce(self.letters) != self.letters:
            raise ValueError(f"word {self.letters} is not freely reduced")

    @classmethod
    def parse(cls, text: str, n: int) -> "Word":
        return reduce(parse_letters(text), n)

    def inverse(self) -> "Word":
        return Word(tuple(-x for x in reversed(self.letters)), self.n)

    def __mul__(self, other: "Word") -> "Word":
        return Word(free_reduce(self.letters + other.letters), self.n)

    def __len__(self):
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def __str__(self):
        return format_letters(self.letters)


@dataclass(frozen=True)
class CyclicWord:
    letters: tuple[int, ...]
    n: int
    canonical: bool = True

    @classmethod
    def parse(cls, text: str, n: int) -> "CyclicWord":
        return cyclic_canonical(Word.parse(text, n))

    def sort_key(self):
        return (len(self.letters), [letter_key(x) for x in self.letters])

    def __len__(self):
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def __str__(self):
        return format_letters(self.letters)


def reduce(letters: Sequence[int], n: int) -> Word:
    _check_letters(letters, n)
    return Word(free_reduce(letters), n)


def cyclic_canonical(w: Word) -> CyclicWord:
    return CyclicWord(canonical_rotation(w.letters), w.n, True)


def are_conjugate(u: Word, v: Word) -> bool:
    return cyclic_canonical(u) == cyclic_canonical(v)


@lru_cache(maxsize=None)
def _w0_letters(n: int) -> tuple[tuple[int, ...], ...]:
    seen = set()
    for i in range(1, n + 1):
        seen.add(canonical_rotation((i,)))
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i != j:
                seen.add(canonical_rotation((i, j)))
                seen.add(canonical_rotation((i, -j)))
    return tuple(sorted(seen, key=lambda w: (len(w), [letter_key(x) for x in w])))


def generate_W0(n: int) -> list[CyclicWord]:
    """Classes of x_i, x_i x_j and x_i x_j^-1 (i != j), deduplicated up to conjugacy."""
    if n < 2:
        raise ValueError("rank must be at least 2")
    return [CyclicWord(w, n) for w in _w0_letters(n)]


@lru_cache(maxsize=None)
def _classes_of_length(n: int, length: int) -> tuple[tuple[int, ...], ...]:
    alphabet = sorted([i for i in range(1, n + 1)] + [-i for i in range(1, n + 1)], key=letter_key)
    out = []
    word: list[int] = []

    def extend():
        if len(word) == length:
            if length > 1 and word[-1] == -word[0]:
                return
            w = tuple(word)
            if canonical_rotation(w) == w:
                out.append(w)
            return
        for x in alphabet:
            if word and x == -word[-1]:
                continue
            # a canonical rotation never starts above its first letter
            if word and letter_key(x) < letter_key(word[0]):
                continue
            word.append(x)
            extend()
            word.pop()

    extend()
    return tuple(out)


def class_letters(n: int, max_len: int) -> tuple[tuple[int, ...], ...]:
    out: list[tuple[int, ...]] = []
    for length in range(1, max_len + 1):
        out.extend(_classes_of_length(n, length))
    return tuple(out)


def enumerate_classes(n: int, max_len: int) -> list[CyclicWord]:
    """All conjugacy classes of cyclic length <= max_len, in shortlex order of canonical forms.

    The order is prefix-stable: raising ``max_len`` only appends classes.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    return [CyclicWord(w, n) for w in class_letters(n, max_len)]


def substitute(images: Sequence[Sequence[int]], letters: Iterable[int]) -> tuple[int, ...]:
    out: list[int] = []
    for x in letters:
        img = images[abs(x) - 1]
        if x < 0:
            img = [-y for y in reversed(img)]
        for y in img:
            if out and out[-1] == -y:
                out.pop()
            else:
                out.append(y)
    return tuple(out)


def _nielsen_moves(words: tuple[tuple[int, ...], ...]):
    """All elementary Nielsen moves u_i -> u_i u_j^e or u_j^e u_i, with move labels."""
    k = len(words)
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            for eps in (1, -1):
                vj = words[j] if eps == 1 else tuple(-y for y in reversed(words[j]))
                yield (i, j, eps, "right"), free_reduce(words[i] + vj)
                yield (i, j, eps, "left"), free_reduce(vj + words[i])


def _apply_move(words, move, new_word):
    i = move[0]
    return words[:i] + (new_word,) + words[i + 1:]


def _track(track, move):
    i, j, eps, side = move
    vj = track[j] if eps == 1 else tuple(-y for y in reversed(track[j]))
    new = free_reduce(track[i] + vj) if side == "right" else free_reduce(vj + track[i])
    return track[:i] + (new,) + track[i + 1:]


def nielsen_reduce(images: Sequence[Sequence[int]], max_states: int = 50000):
    """Carry a tuple of words to single letters by length-nonincreasing Nielsen moves.

    Returns ``(letters, track)`` where ``letters[i]`` is a signed letter and
    ``track[i]`` is the word in the original generators that the moves built,
    so that the input map sends ``track[i]`` to ``letters[i]``.  Raises
    NotAnAutomorphism when the tuple is not a basis.
    """
    words = tuple(free_reduce(w) for w in images)
    n = len(words)
    track = tuple((i + 1,) for i in range(n))
    while True:
        if any(len(w) == 0 for w in words):
            raise NotAnAutomorphism("a basis element reduced to the identity")
        total = sum(len(w) for w in words)
        if total == n:
            mags = sorted(abs(w[0]) for w in words)
            if mags != list(range(1, n + 1)):
                raise NotAnAutomorphism("images are not a signed permutation of the generators")
            return tuple(w[0] for w in words), track
        step = _find_reducing_path(words, total, max_states)
        if step is None:
            raise NotAnAutomorphism("tuple is Nielsen reduced but not a basis")
        for move, new_word in step:
            track = _track(track, move)
            words = _apply_move(words, move, new_word)


def _find_reducing_path(words, total, max_states):
    # greedy first; otherwise breadth-first search through equal-length states
    best = None
    for move, new_word in _nielsen_moves(words):
        gain = len(words[move[0]]) - len(new_word)
        if gain > 0 and (best is None or gain > best[0]):
            best = (gain, move, new_word)
    if best is not None:
        return [(best[1], best[2])]
    queue = deque([(words, [])])
    seen = {words}
    while queue:
        state, path = queue.popleft()
        for move, new_word in _nielsen_moves(state):
            delta = len(new_word) - len(state[move[0]])
            if delta < 0:
                return path + [(move, new_word)]
            if delta == 0:
                nxt = _apply_move(state, move, new_word)
                if nxt not in seen:
                    if len(seen) >= max_states:
                        raise RuntimeError("Nielsen search exceeded its state budget")
                    seen.add(nxt)
                    queue.append((nxt, path + [(move, new_word)]))
    return None


@dataclass(frozen=True)
class Marking:
    """Images of the generators x_1..x_n as words in the petals of a target rose."""

    images: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        n = len(self.images)
        for img in self.images:
            _check_letters(img, n)
        object.__setattr__(self, "images", tuple(free_reduce(w) for w in self.images))

    @property
    def n(self) -> int:
        return len(self.images)

    @classmethod
    def identity(cls, n: int) -> "Marking":
        return cls(tuple((i,) for i in range(1, n + 1)))

    @classmethod
    def parse(cls, texts: Sequence[str]) -> "Marking":
        return cls(tuple(parse_letters(t) for t in texts))

    def to_strings(self) -> list[str]:
        return [format_letters(w) for w in self.images]

    def apply(self, letters: Iterable[int]) -> tuple[int, ...]:
        return substitute(self.images, letters)

    def compose(self, inner: "Marking") -> "Marking":
        """``self o inner``: apply ``inner`` first."""
        return Marking(tuple(self.apply(w) for w in inner.images))

    def is_automorphism(self) -> bool:
        try:
            nielsen_reduce(self.images)
        except NotAnAutomorphism:
            return False
        return True

    def validate(self) -> "Marking":
        nielsen_reduce(self.images)
        return self

    def inverse(self) -> "Marking":
        letters, track = nielsen_reduce(self.images)
        inv: list[tuple[int, ...]] = [()] * self.n
        for s, t in zip(letters, track):
            if s > 0:
                inv[s - 1] = t
            else:
                inv[-s - 1] = tuple(-y for y in reversed(t))
        return Marking(tuple(inv))


def apply_marking(g: Marking, w: Word) -> Word:
    if g.n != w.n:
        raise ValueError("rank mismatch")
    return Word(g.apply(w.letters), w.n)
