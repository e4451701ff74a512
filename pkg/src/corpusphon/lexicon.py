"""Pronunciation lexicons, word lists, and Kaldi phone-set files.

A lexicon is an ordered multimap from orthographic word to one or more phone
sequences ("Multiple pronunciation variants are fine"). Word matching is
case-sensitive; uppercasing belongs to transcript normalization, not lookup.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

from .errors import ToolkitError, ToolkitWarning

# Arpabet vowel bases; stress digits 0/1/2 attach only to these.
VOWELS = frozenset(
    "AA AE AH AO AW AY EH ER EY IH IY OW OY UH UW".split()
)

DEFAULT_OOV = ("<oov>", "oov")
DEFAULT_STRIP_CHARS = ".,?!;:"


class LexiconError(ToolkitError):
    pass


class MalformedLine(LexiconError):
    """A lexicon line with a word but no phones."""


class InvalidStress(LexiconError):
    """Stress digit on a non-vowel base, or a digit outside 0..2."""


class DuplicateEntryWarning(ToolkitWarning):
    """Identical (word, pronunciation) pair seen twice; collapsed to one."""


Pron = tuple[str, ...]


@dataclass(frozen=True)
class ArpabetPhone:
    base: str
    stress: int | None = None

    def render(self) -> str:
        return self.base if self.stress is None else f"{self.base}{self.stress}"


def parse_arpabet(symbol: str) -> ArpabetPhone:
    """Split a trailing stress digit off a vowel; consonants carry none."""
    if not symbol:
        raise InvalidStress("empty phone symbol")
    if symbol[-1].isdigit():
        base, digit = symbol[:-1], symbol[-1]
        if base not in VOWELS:
            raise InvalidStress(
                f"{symbol!r}: stress digit on non-vowel base {base!r}"
            )
        if digit not in "012":
            raise InvalidStress(f"{symbol!r}: stress digit must be 0, 1, or 2")
        return ArpabetPhone(base, int(digit))
    return ArpabetPhone(symbol)


def stress_base(symbol: str) -> str:
    """The symbol without its stress digit when it is a valid vowel."""
    if symbol and symbol[-1] in "012" and symbol[:-1] in VOWELS:
        return symbol[:-1]
    return symbol


def is_vowel(symbol: str) -> bool:
    return stress_base(symbol) in VOWELS


class Separator(enum.Enum):
    ANY_WHITESPACE = "whitespace"
    TWO_SPACES = "two-spaces"
    TAB = "tab"


@dataclass
class Lexicon:
    """Ordered (word, pronunciation) entries plus a word index."""

    entries: list[tuple[str, Pron]] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._index: dict[str, list[Pron]] = {}
        for word, pron in self.entries:
            self._index.setdefault(word, []).append(pron)

    @property
    def words(self) -> list[str]:
        return list(self._index)

    def prons(self, word: str) -> list[Pron]:
        return list(self._index.get(word, []))

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def __len__(self) -> int:
        return len(self.entries)

    def phones(self) -> set[str]:
        return {p for _, pron in self.entries for p in pron}

    def reverse(self) -> dict[Pron, list[str]]:
        """Pronunciation -> candidate words, in entry order, deduplicated."""
        rev: dict[Pron, list[str]] = {}
        for word, pron in self.entries:
            bucket = rev.setdefault(pron, [])
            if word not in bucket:
                bucket.append(word)
        return rev


def parse_lexicon(
    content: str, separator: Separator = Separator.ANY_WHITESPACE
) -> Lexicon:
    """Parse `WORD <sep> PH PH ...` lines; blank lines are skipped.

    Identical duplicate entries collapse to one with a DuplicateEntryWarning;
    a word with no phones is a MalformedLine.
    """
    entries: list[tuple[str, Pron]] = []
    seen: set[tuple[str, Pron]] = set()
    for i, line in enumerate(content.splitlines(), 1):
        if not line.strip():
            continue
        if separator is Separator.TWO_SPACES:
            word, _, rest = line.partition("  ")
        elif separator is Separator.TAB:
            word, _, rest = line.partition("\t")
        else:
            parts = line.split(None, 1)
            word, rest = parts[0], parts[1] if len(parts) > 1 else ""
        word = word.strip()
        phones = tuple(rest.split())
        if not word:
            raise MalformedLine(f"line {i}: missing word")
        if not phones:
            raise MalformedLine(f"line {i}: word {word!r} has no phones")
        entry = (word, phones)
        if entry in seen:
            warnings.warn(
                f"line {i}: duplicate entry for {word!r} collapsed",
                DuplicateEntryWarning,
                stacklevel=2,
            )
            continue
        seen.add(entry)
        entries.append(entry)
    return Lexicon(entries)


def render_lexicon(
    lex: Lexicon, separator: Separator = Separator.ANY_WHITESPACE
) -> str:
    sep = {
        Separator.ANY_WHITESPACE: " ",
        Separator.TWO_SPACES: "  ",
        Separator.TAB: "\t",
    }[separator]
    return "".join(
        f"{word}{sep}{' '.join(pron)}\n" for word, pron in lex.entries
    )


# ---------------------------------------------------------------------------
# word lists


@dataclass(frozen=True)
class NormalizationPolicy:
    uppercase: bool = True
    strip_chars: str = DEFAULT_STRIP_CHARS
    keep_apostrophe: bool = True


@dataclass(frozen=True)
class WordCount:
    word: str
    count: int


# noise/silence markup passes through transcript normalization untouched
MARKUP_TOKENS = frozenset({"{NS}", "{SP}"})


def _normalize_token(token: str, policy: NormalizationPolicy) -> str:
    if token in MARKUP_TOKENS:
        return token
    if policy.uppercase:
        token = token.upper()
    drop = policy.strip_chars + ("" if policy.keep_apostrophe else "'")
    return token.translate(str.maketrans("", "", drop))


def extract_word_list(
    transcripts: str, policy: NormalizationPolicy = NormalizationPolicy()
) -> list[WordCount]:
    """Unique normalized words with counts.

    Sorted by descending count, then ascending byte order. Punctuation is
    stripped from the word rather than deleting the word, so the vocabulary
    never silently shrinks.
    """
    counts: dict[str, int] = {}
    for token in transcripts.split():
        word = _normalize_token(token, policy)
        if word:
            counts[word] = counts.get(word, 0) + 1
    ordered = sorted(
        counts.items(), key=lambda kv: (-kv[1], kv[0].encode("utf-8"))
    )
    return [WordCount(w, c) for w, c in ordered]


def unique_words(counts: list[WordCount]) -> list[str]:
    """The words.txt projection: sorted unique words."""
    return sorted((wc.word for wc in counts), key=lambda w: w.encode("utf-8"))


# ---------------------------------------------------------------------------
# filtering and phone sets


def filter_lexicon(
    lex: Lexicon,
    words: set[str],
    oov_entry: tuple[str, str] = DEFAULT_OOV,
) -> Lexicon:
    """Keep only corpus words, with the out-of-vocabulary entry first."""
    oov_word, oov_phone = oov_entry
    entries: list[tuple[str, Pron]] = [(oov_word, (oov_phone,))]
    entries += [e for e in lex.entries if e[0] in words]
    return Lexicon(entries)


def missing_words(words: set[str], lex: Lexicon) -> list[str]:
    """The words you need to add to the dictionary, byte-sorted."""
    return sorted(
        (w for w in words if w not in lex), key=lambda w: w.encode("utf-8")
    )


def derive_nonsilence_phones(
    lex: Lexicon, exclude: frozenset[str] | set[str] = frozenset()
) -> list[list[str]]:
    """Group the lexicon's phones so that like phones share a line.

    Stress variants of one vowel form a group (AA0 AA1 AA2); consonants and
    unrecognized symbols are singleton groups. Groups come out byte-sorted.
    """
    groups: dict[str, list[str]] = {}
    for phone in lex.phones():
        if phone in exclude:
            continue
        groups.setdefault(stress_base(phone), []).append(phone)
    return [
        sorted(groups[base], key=lambda p: p.encode("utf-8"))
        for base in sorted(groups, key=lambda b: b.encode("utf-8"))
    ]


def render_phone_groups(groups: list[list[str]]) -> str:
    return "".join(" ".join(group) + "\n" for group in groups)


def derive_silence_files() -> tuple[str, str]:
    """(silence_phones.txt, optional_silence.txt) contents; corpus-invariant."""
    return "SIL\noov\n", "SIL\n"


def unstressed_only_prons(lex: Lexicon) -> list[tuple[str, Pron]]:
    """Entries whose vowels all carry stress 0.

    Stress digits get added by hand after lextool, so an all-unstressed
    pronunciation usually means that step was skipped. Informational only;
    plenty of function words legitimately look like this.
    """
    suspicious = []
    for word, pron in lex.entries:
        stresses = [
            parse_arpabet(p).stress for p in pron if is_vowel(p)
        ]
        if stresses and all(s == 0 for s in stresses):
            suspicious.append((word, pron))
    return suspicious
