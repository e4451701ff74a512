"""CTM post-processing: from aligner output to per-file word alignments.

The pipeline: parse the 5-field CTM, map numeric phone IDs to symbols via
the phones.txt table, shift utterance-relative times onto the file timeline
using the segments file, split per file, regroup phones into words via their
B/I/E/S position suffixes, and match each reconstructed pronunciation to its
lexicon word. The 11-column intermediate table is emitted for
interoperability with existing downstream scripts and can be read back.

Per-file processing is embarrassingly parallel; everything here is pure.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import ToolkitError
from .kaldi import SegmentLine, format_seconds
from .lexicon import Lexicon, Pron
from .textgrid import Interval, IntervalTier

DEFAULT_SILENCE = frozenset({"SIL", "sp", "SP", "oov", "<eps>"})

TIME_TOL = 1e-6

ALIGNMENT_HEADER = (
    "file_utt\tfile\tid\tali\tstartinutt\tdur\tphone\t"
    "start_utt\tend_utt\tstart\tend"
)

_POSITION_RE = re.compile(r"^(.*)_([BIES])$")


class CtmError(ToolkitError):
    pass


class MalformedCtmLine(CtmError):
    """Wrong field count or a non-numeric numeric field."""


class UnknownPhoneId(CtmError):
    """Numeric phone ID absent from the symbol table."""


class UnknownUtterance(CtmError):
    """CTM utterance with no segments row."""


class PronunciationMismatch(CtmError):
    """Observed phone sequence not among the lexicon prons for the word."""


class AmbiguousPron(CtmError):
    """Several lexicon words share the pronunciation and no reference given."""


class TokenBeyondDuration(CtmError):
    """Phone token extends past the declared file duration."""


@dataclass(frozen=True)
class CtmEntry:
    utt: str
    channel: int
    start: float
    dur: float
    phone: int | str  # numeric ID until resolved, then the symbol
    line: int = 0

    @property
    def is_numeric(self) -> bool:
        return isinstance(self.phone, int)


@dataclass(frozen=True)
class PhoneToken:
    """One aligned phone on the file timeline."""

    phone_base: str  # symbol without the position suffix (stress retained)
    position: str | None  # B, I, E, S, or None for suffixless symbols
    file_id: str
    start: float
    end: float
    utt: str = ""

    @property
    def symbol(self) -> str:
        return (
            self.phone_base
            if self.position is None
            else f"{self.phone_base}_{self.position}"
        )

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class WordUnit:
    pron: Pron
    start: float
    end: float
    phones: tuple[PhoneToken, ...]


@dataclass(frozen=True)
class GroupDefect:
    token_index: int
    message: str


@dataclass
class GroupResult:
    units: list[WordUnit] = field(default_factory=list)
    non_words: list[PhoneToken] = field(default_factory=list)
    defects: list[GroupDefect] = field(default_factory=list)


@dataclass(frozen=True)
class AlignedWord:
    word: str
    pron: Pron
    file_id: str
    start: float
    end: float
    phones: tuple[PhoneToken, ...]


@dataclass(frozen=True)
class PhoneSymbolTable:
    """The data/lang phones.txt map from integer IDs to phone symbols."""

    by_id: dict[int, str]

    @classmethod
    def parse(cls, content: str) -> "PhoneSymbolTable":
        by_id: dict[int, str] = {}
        symbols: set[str] = set()
        for i, line in enumerate(content.splitlines(), 1):
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != 2:
                raise CtmError(f"phones.txt line {i}: expected 'symbol id'")
            symbol, raw_id = fields
            try:
                pid = int(raw_id)
            except ValueError:
                raise CtmError(f"phones.txt line {i}: non-integer ID") from None
            if pid in by_id:
                raise CtmError(f"phones.txt line {i}: duplicate ID {pid}")
            if symbol in symbols:
                raise CtmError(f"phones.txt line {i}: duplicate symbol {symbol!r}")
            by_id[pid] = symbol
            symbols.add(symbol)
        return cls(by_id)


def split_position(symbol: str) -> tuple[str, str | None]:
    m = _POSITION_RE.match(symbol)
    if m:
        return m.group(1), m.group(2)
    return symbol, None


# ---------------------------------------------------------------------------
# parsing and resolution


def parse_ctm(content: str) -> list[CtmEntry]:
    """Parse `utt channel start dur phone` lines, auto-detecting numeric IDs."""
    entries = []
    for i, line in enumerate(content.splitlines(), 1):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 5:
            raise MalformedCtmLine(
                f"line {i}: expected 5 fields, got {len(fields)}"
            )
        utt, raw_channel, raw_start, raw_dur, raw_phone = fields
        try:
            channel = int(raw_channel)
        except ValueError:
            raise MalformedCtmLine(f"line {i}: non-integer channel") from None
        try:
            start, dur = float(raw_start), float(raw_dur)
        except ValueError:
            raise MalformedCtmLine(f"line {i}: non-numeric time") from None
        if start < 0:
            raise MalformedCtmLine(f"line {i}: negative start time")
        if dur <= 0:
            raise MalformedCtmLine(f"line {i}: non-positive duration")
        phone: int | str = int(raw_phone) if raw_phone.isdigit() else raw_phone
        entries.append(CtmEntry(utt, channel, start, dur, phone, line=i))
    return entries


def resolve_phone_ids(
    entries: list[CtmEntry], table: PhoneSymbolTable
) -> list[CtmEntry]:
    """Replace numeric phone IDs with symbols; symbolic entries pass through."""
    out = []
    for e in entries:
        if isinstance(e.phone, int):
            symbol = table.by_id.get(e.phone)
            if symbol is None:
                raise UnknownPhoneId(
                    f"line {e.line}: phone ID {e.phone} not in phones.txt"
                )
            out.append(
                CtmEntry(e.utt, e.channel, e.start, e.dur, symbol, e.line)
            )
        else:
            out.append(e)
    return out


def to_file_times(
    entries: list[CtmEntry], segments: list[SegmentLine]
) -> list[PhoneToken]:
    """Shift utterance-relative CTM times onto the file timeline.

    The CTM reports times relative to the utterance; the segments row
    supplies the utterance's offset and file ID. The B/I/E/S word-position
    suffix is split off here.
    """
    seg_by_utt = {s.utt: s for s in segments}
    tokens = []
    for e in entries:
        seg = seg_by_utt.get(e.utt)
        if seg is None:
            raise UnknownUtterance(f"utterance {e.utt!r} has no segments row")
        if isinstance(e.phone, int):
            raise CtmError(
                f"line {e.line}: numeric phone ID {e.phone}; resolve IDs first"
            )
        base, position = split_position(e.phone)
        start = seg.start + e.start
        tokens.append(
            PhoneToken(base, position, seg.file_id, start, start + e.dur, e.utt)
        )
    return tokens


def split_by_file(tokens: list[PhoneToken]) -> dict[str, list[PhoneToken]]:
    """Group by file ID (keys byte-sorted), each group sorted by start time."""
    grouped: dict[str, list[PhoneToken]] = {}
    for t in tokens:
        grouped.setdefault(t.file_id, []).append(t)
    return {
        fid: sorted(grouped[fid], key=lambda t: t.start)
        for fid in sorted(grouped, key=lambda f: f.encode("utf-8"))
    }


# ---------------------------------------------------------------------------
# word grouping and matching


def group_words(
    tokens: list[PhoneToken],
    silence_symbols: frozenset[str] | set[str] = DEFAULT_SILENCE,
) -> GroupResult:
    """Regroup phones into word units via their B/I/E/S suffixes.

    A unit opens at B and closes at E; S is a singleton unit. Suffixless
    tokens go to the non-word list; one outside the silence class is also
    reported as a defect, since word phones should carry a position.
    Orphaned positions are reported, the offending tokens land in the
    non-word list, and grouping resumes at the next B or S, so one aligner
    glitch never discards a whole file. Every input token ends up in
    exactly one word unit or the non-word list.
    """
    result = GroupResult()
    open_run: list[tuple[int, PhoneToken]] = []

    def abandon(reason: str) -> None:
        if open_run:
            idx = open_run[0][0]
            result.defects.append(GroupDefect(idx, reason))
            result.non_words.extend(t for _, t in open_run)
            open_run.clear()

    def close() -> None:
        phones = tuple(t for _, t in open_run)
        result.units.append(
            WordUnit(
                pron=tuple(t.phone_base for t in phones),
                start=phones[0].start,
                end=phones[-1].end,
                phones=phones,
            )
        )
        open_run.clear()

    for i, token in enumerate(tokens):
        pos = token.position
        if pos is None:
            abandon(f"token {i}: word interrupted by {token.symbol!r}")
            if token.phone_base not in silence_symbols:
                result.defects.append(
                    GroupDefect(
                        i,
                        f"token {i}: {token.symbol!r} has no word-position "
                        "suffix and is not a known silence symbol",
                    )
                )
            result.non_words.append(token)
        elif pos == "B":
            abandon(f"token {i}: new word starts before previous one ended")
            open_run.append((i, token))
        elif pos == "S":
            abandon(f"token {i}: singleton starts before previous word ended")
            open_run.append((i, token))
            close()
        elif pos == "I":
            if not open_run:
                result.defects.append(
                    GroupDefect(i, f"token {i}: internal phone with no open word")
                )
                result.non_words.append(token)
            else:
                open_run.append((i, token))
        elif pos == "E":
            if not open_run:
                result.defects.append(
                    GroupDefect(i, f"token {i}: final phone with no open word")
                )
                result.non_words.append(token)
            else:
                open_run.append((i, token))
                close()
    abandon("word still open at end of stream")
    return result


def match_words(
    units: list[WordUnit],
    lex: Lexicon,
    reference_words: list[str] | None = None,
) -> list[AlignedWord]:
    """Attach lexicon words to reconstructed pronunciation units.

    With a reference word list (the data-dir text line), units match
    positionally and each pronunciation is checked against the word's
    lexicon entries. Without one, the reverse index must name a unique
    candidate; homophones raise AmbiguousPron.
    """
    out = []
    if reference_words is not None:
        if len(units) != len(reference_words):
            raise PronunciationMismatch(
                f"{len(units)} word units but {len(reference_words)} "
                "reference words"
            )
        for unit, word in zip(units, reference_words):
            if unit.pron not in lex.prons(word):
                raise PronunciationMismatch(
                    f"word {word!r}: observed pronunciation "
                    f"{' '.join(unit.pron)!r} not in lexicon"
                )
            out.append(_aligned(word, unit))
        return out

    rev = lex.reverse()
    for unit in units:
        candidates = rev.get(unit.pron, [])
        if not candidates:
            raise PronunciationMismatch(
                f"no lexicon word pronounced {' '.join(unit.pron)!r}"
            )
        if len(candidates) > 1:
            raise AmbiguousPron(
                f"pronunciation {' '.join(unit.pron)!r} is shared by "
                f"{', '.join(candidates)}"
            )
        out.append(_aligned(candidates[0], unit))
    return out


def _aligned(word: str, unit: WordUnit) -> AlignedWord:
    return AlignedWord(
        word=word,
        pron=unit.pron,
        file_id=unit.phones[0].file_id,
        start=unit.start,
        end=unit.end,
        phones=unit.phones,
    )


# ---------------------------------------------------------------------------
# tier construction


def phones_to_tier(
    tokens: list[PhoneToken], file_duration: float, name: str = "phones"
) -> IntervalTier:
    """One interval per token, labeled with the full suffixed symbol."""
    for t in tokens:
        if t.end > file_duration + TIME_TOL:
            raise TokenBeyondDuration(
                f"token {t.symbol!r} ends at {t.end} but the file is "
                f"{file_duration} s"
            )
    intervals = tuple(
        Interval(t.start, min(t.end, file_duration), t.symbol) for t in tokens
    )
    return IntervalTier(name, 0.0, file_duration, intervals).normalized()


def words_to_tier(
    words: list[AlignedWord], file_duration: float, name: str = "words"
) -> IntervalTier:
    for w in words:
        if w.end > file_duration + TIME_TOL:
            raise TokenBeyondDuration(
                f"word {w.word!r} ends at {w.end} but the file is "
                f"{file_duration} s"
            )
    intervals = tuple(
        Interval(w.start, min(w.end, file_duration), w.word) for w in words
    )
    return IntervalTier(name, 0.0, file_duration, intervals).normalized()


# ---------------------------------------------------------------------------
# the 11-column intermediate table


@dataclass(frozen=True)
class AlignmentRow:
    utt: str
    file_id: str
    phone_field: str  # the raw CTM phone column (ID or symbol)
    channel: int
    start_in_utt: float
    dur: float
    phone: str  # resolved full symbol
    utt_start: float
    utt_end: float
    start: float
    end: float


def alignment_rows(
    entries: list[CtmEntry],
    segments: list[SegmentLine],
    table: PhoneSymbolTable | None = None,
) -> list[AlignmentRow]:
    resolved = resolve_phone_ids(entries, table) if table else entries
    seg_by_utt = {s.utt: s for s in segments}
    rows = []
    for raw, e in zip(entries, resolved):
        seg = seg_by_utt.get(e.utt)
        if seg is None:
            raise UnknownUtterance(f"utterance {e.utt!r} has no segments row")
        if isinstance(e.phone, int):
            raise CtmError(f"line {e.line}: unresolved phone ID {e.phone}")
        start = seg.start + e.start
        rows.append(
            AlignmentRow(
                utt=e.utt,
                file_id=seg.file_id,
                phone_field=str(raw.phone),
                channel=e.channel,
                start_in_utt=e.start,
                dur=e.dur,
                phone=e.phone,
                utt_start=seg.start,
                utt_end=seg.end,
                start=start,
                end=start + e.dur,
            )
        )
    return rows


def render_alignment_table(rows: list[AlignmentRow]) -> str:
    lines = [ALIGNMENT_HEADER]
    for r in rows:
        lines.append(
            "\t".join(
                [
                    r.utt,
                    r.file_id,
                    r.phone_field,
                    str(r.channel),
                    format_seconds(r.start_in_utt),
                    format_seconds(r.dur),
                    r.phone,
                    format_seconds(r.utt_start),
                    format_seconds(r.utt_end),
                    format_seconds(r.start),
                    format_seconds(r.end),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def parse_alignment_table(content: str) -> list[AlignmentRow]:
    lines = content.splitlines()
    if not lines or lines[0] != ALIGNMENT_HEADER:
        raise CtmError("missing or wrong alignment table header")
    rows = []
    for i, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 11:
            raise CtmError(f"alignment table line {i}: expected 11 columns")
        try:
            rows.append(
                AlignmentRow(
                    utt=fields[0],
                    file_id=fields[1],
                    phone_field=fields[2],
                    channel=int(fields[3]),
                    start_in_utt=float(fields[4]),
                    dur=float(fields[5]),
                    phone=fields[6],
                    utt_start=float(fields[7]),
                    utt_end=float(fields[8]),
                    start=float(fields[9]),
                    end=float(fields[10]),
                )
            )
        except ValueError:
            raise CtmError(f"alignment table line {i}: non-numeric field") from None
    return rows


# ---------------------------------------------------------------------------
# end-to-end convenience


def align_corpus(
    entries: list[CtmEntry],
    segments: list[SegmentLine],
    lex: Lexicon,
    text: dict[str, list[str]] | None = None,
    silence_symbols: frozenset[str] | set[str] = DEFAULT_SILENCE,
) -> dict[str, tuple[list[PhoneToken], list[AlignedWord]]]:
    """Per-file phone tokens and aligned words from resolved CTM entries.

    Word grouping and matching run per utterance so the reference transcript
    (when given) can be applied positionally; results are then collected per
    file in byte-sorted file order.
    """
    tokens = to_file_times(entries, segments)
    by_utt: dict[str, list[PhoneToken]] = {}
    for t in tokens:
        by_utt.setdefault(t.utt, []).append(t)

    words_by_file: dict[str, list[AlignedWord]] = {}
    for seg in segments:
        utt_tokens = by_utt.get(seg.utt)
        if not utt_tokens:
            continue
        grouped = group_words(utt_tokens, silence_symbols)
        reference = text.get(seg.utt) if text is not None else None
        aligned = match_words(grouped.units, lex, reference)
        words_by_file.setdefault(seg.file_id, []).extend(aligned)

    out: dict[str, tuple[list[PhoneToken], list[AlignedWord]]] = {}
    for fid, file_tokens in split_by_file(tokens).items():
        words = sorted(words_by_file.get(fid, []), key=lambda w: w.start)
        out[fid] = (file_tokens, words)
    return out


def corpus_durations(
    segments: list[SegmentLine],
    file_durations: dict[str, float] | None = None,
) -> dict[str, float]:
    """File durations, defaulting to the last segment end per file."""
    out: dict[str, float] = {}
    for seg in segments:
        out[seg.file_id] = max(out.get(seg.file_id, 0.0), seg.end)
    if file_durations:
        out.update(file_durations)
    return out
