"""Category lexicon scoring over token streams.

The lexicon format is plain UTF-8 text: a ``%name`` line opens a category,
subsequent non-empty lines are patterns until the next ``%`` line, and
``#`` lines are comments. A pattern is either a literal word or a prefix
ending in ``*`` (the only wildcard position allowed).

Scores are percentages of matched tokens, so a document concatenated with
itself scores identically and coefficients fit on these variables stay on
the customary word-count scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from .errors import DuplicateCategory, LexiconParseError


@dataclass(frozen=True)
class Lexicon:
    """Compiled category patterns: literals as a set, prefixes as a tuple."""

    categories: dict[str, tuple[frozenset[str], tuple[str, ...]]]

    def names(self) -> list[str]:
        return list(self.categories)

    def matches(self, category: str, token: str) -> bool:
        literals, prefixes = self.categories[category]
        if token in literals:
            return True
        return any(token.startswith(p) for p in prefixes)


@dataclass(frozen=True)
class SentimentScores:
    """Per-category percentage scores for one document."""

    scores: dict[str, float]
    token_count: int

    def __getitem__(self, category: str) -> float:
        return self.scores[category]


def _compile(raw: dict[str, list[str]]) -> Lexicon:
    compiled = {}
    for name, patterns in raw.items():
        literals = frozenset(p for p in patterns if not p.endswith("*"))
        prefixes = tuple(sorted(p[:-1] for p in patterns if p.endswith("*")))
        compiled[name] = (literals, prefixes)
    return Lexicon(compiled)


def parse_lexicon(text: str, source: str = "<string>") -> Lexicon:
    """Parse lexicon text; errors carry the offending line number."""
    raw: dict[str, list[str]] = {}
    current: str | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("%"):
            if current is not None and not raw[current]:
                raise LexiconParseError(
                    f"{source}:{lineno}: category {current!r} has no patterns"
                )
            name = stripped[1:].strip()
            if not name:
                raise LexiconParseError(f"{source}:{lineno}: empty category name")
            if name in raw:
                raise DuplicateCategory(f"{source}:{lineno}: duplicate category {name!r}")
            raw[name] = []
            current = name
            continue
        if current is None:
            raise LexiconParseError(
                f"{source}:{lineno}: pattern {stripped!r} appears before any category"
            )
        star = stripped.find("*")
        if star != -1 and star != len(stripped) - 1:
            raise LexiconParseError(
                f"{source}:{lineno}: wildcard only allowed in final position: {stripped!r}"
            )
        if stripped == "*":
            raise LexiconParseError(f"{source}:{lineno}: bare wildcard is not a pattern")
        raw[current].append(stripped.lower())
    if current is not None and not raw[current]:
        raise LexiconParseError(f"{source}: category {current!r} has no patterns")
    if not raw:
        raise LexiconParseError(f"{source}: no categories found")
    return _compile(raw)


def load_lexicon(path) -> Lexicon:
    with open(path, encoding="utf-8") as fh:
        return parse_lexicon(fh.read(), source=str(path))


def load_demo_lexicon() -> Lexicon:
    """Small bundled lexicon for tests and demos.

    Covers the ten categories used in the regressions. It is an open word
    list written for this project, not a reproduction of any proprietary
    dictionary, so treat its scores as structurally (not lexically)
    comparable to published ones.
    """
    text = resources.files("ecpipe.data").joinpath("demo_lexicon.txt").read_text("utf-8")
    return parse_lexicon(text, source="demo_lexicon.txt")


def score(tokens: list[str], lex: Lexicon) -> SentimentScores:
    """Score a token stream: 100 * matched tokens / total tokens per category.

    A token matching several patterns inside one category counts once per
    occurrence; a token may contribute to multiple categories. An empty
    stream scores zero everywhere by convention.
    """
    total = len(tokens)
    if total == 0:
        return SentimentScores({name: 0.0 for name in lex.categories}, 0)
    hits = {name: 0 for name in lex.categories}
    for tok in tokens:
        for name in lex.categories:
            if lex.matches(name, tok):
                hits[name] += 1
    return SentimentScores(
        {name: 100.0 * count / total for name, count in hits.items()}, total
    )
