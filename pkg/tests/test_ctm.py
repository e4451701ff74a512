import pytest

from corpusphon import kaldi
from corpusphon.ctm import (
    ALIGNMENT_HEADER,
    AmbiguousPron,
    CtmEntry,
    MalformedCtmLine,
    PhoneSymbolTable,
    PhoneToken,
    PronunciationMismatch,
    TokenBeyondDuration,
    UnknownPhoneId,
    UnknownUtterance,
    align_corpus,
    alignment_rows,
    corpus_durations,
    group_words,
    match_words,
    parse_alignment_table,
    parse_ctm,
    phones_to_tier,
    render_alignment_table,
    resolve_phone_ids,
    split_by_file,
    split_position,
    to_file_times,
    words_to_tier,
)
from corpusphon.lexicon import parse_lexicon
from corpusphon.textgrid import Interval, TextGrid, parse_textgrid, write_textgrid

# hand-traced expectations for the fixture corpus: file time is the segment
# start plus the utterance-relative CTM time
F1_WORDS = [
    ("SAY", 0.60, 1.00),
    ("KLATT", 1.00, 1.60),
    ("AGAIN", 1.60, 2.30),
    ("SAY", 3.10, 3.48),
    ("PAT", 3.48, 3.95),
    ("AGAIN", 3.95, 4.70),
    ("DOT", 6.15, 6.75),
]
F2_WORDS = [
    ("SAY", 0.37, 0.75),
    ("TUTT", 0.75, 1.23),
    ("AGAIN", 1.23, 2.00),
    ("KLATT", 3.10, 3.88),
    ("PAT", 5.20, 5.80),
    ("DOT", 5.80, 6.55),
]
# first utterance of f1, shifted by its segment start 0.50
F1_FIRST_PHONES = [
    ("SIL", 0.50, 0.60),
    ("S_B", 0.60, 0.75),
    ("EY1_E", 0.75, 1.00),
    ("K_B", 1.00, 1.08),
    ("L_I", 1.08, 1.20),
    ("AE1_I", 1.20, 1.45),
    ("T_E", 1.45, 1.60),
    ("AH0_B", 1.60, 1.70),
    ("G_I", 1.70, 1.82),
    ("EH1_I", 1.82, 2.10),
    ("N_E", 2.10, 2.30),
    ("SIL", 2.30, 2.50),
]


@pytest.fixture
def corpus(fixtures):
    entries = parse_ctm((fixtures / "merged_alignment.ctm").read_text())
    segments = kaldi.parse_segments((fixtures / "segments").read_text())
    table = PhoneSymbolTable.parse((fixtures / "phones.txt").read_text())
    lex = parse_lexicon((fixtures / "lexicon.txt").read_text())
    text = {
        line.utt: list(line.words)
        for line in kaldi.parse_text((fixtures / "text").read_text())
    }
    return entries, segments, table, lex, text


class TestParseCtm:
    def test_numeric_id(self):
        (entry,) = parse_ctm("u1 1 0.00 0.12 42\n")
        assert entry == CtmEntry("u1", 1, 0.0, 0.12, 42, line=1)
        assert entry.is_numeric

    def test_symbolic(self):
        (entry,) = parse_ctm("u1 1 0.00 0.12 AH1_B\n")
        assert entry.phone == "AH1_B" and not entry.is_numeric

    def test_four_fields(self):
        with pytest.raises(MalformedCtmLine):
            parse_ctm("u1 1 0.00 0.12\n")

    def test_non_numeric_time(self):
        with pytest.raises(MalformedCtmLine):
            parse_ctm("u1 1 zero 0.12 42\n")

    def test_zero_duration(self):
        with pytest.raises(MalformedCtmLine):
            parse_ctm("u1 1 0.00 0.00 42\n")


class TestResolve:
    def test_table_lookup(self):
        table = PhoneSymbolTable.parse("AH1_B 42\n")
        out = resolve_phone_ids(parse_ctm("u1 1 0.0 0.1 42\n"), table)
        assert out[0].phone == "AH1_B"

    def test_symbolic_passthrough(self):
        table = PhoneSymbolTable.parse("AH1_B 42\n")
        entries = parse_ctm("u1 1 0.0 0.1 X_B\n")
        assert resolve_phone_ids(entries, table) == entries

    def test_unknown_id(self):
        table = PhoneSymbolTable.parse("AH1_B 42\n")
        with pytest.raises(UnknownPhoneId):
            resolve_phone_ids(parse_ctm("u1 1 0.0 0.1 999\n"), table)


class TestFileTimes:
    def test_offset_addition(self):
        segments = kaldi.parse_segments("u_002 f 4.60 8.54\n")
        entries = [CtmEntry("u_002", 1, 0.25, 0.10, "AH1_B")]
        (token,) = to_file_times(entries, segments)
        assert token.start == pytest.approx(4.85, abs=1e-9)
        assert token.end == pytest.approx(4.95, abs=1e-9)
        assert token.file_id == "f"
        assert token.phone_base == "AH1" and token.position == "B"

    def test_zero_start_is_segment_start(self):
        segments = kaldi.parse_segments("u f 3.25 5.0\n")
        (token,) = to_file_times([CtmEntry("u", 1, 0.0, 0.1, "SIL")], segments)
        assert token.start == 3.25
        assert token.position is None

    def test_unknown_utterance(self):
        with pytest.raises(UnknownUtterance):
            to_file_times([CtmEntry("zz", 1, 0.0, 0.1, "SIL")], [])

    def test_suffix_split(self):
        assert split_position("AH1_B") == ("AH1", "B")
        assert split_position("AH_S") == ("AH", "S")
        assert split_position("SIL") == ("SIL", None)


class TestSplitByFile:
    def test_two_files(self, corpus):
        entries, segments, table, _, _ = corpus
        tokens = to_file_times(resolve_phone_ids(entries, table), segments)
        grouped = split_by_file(tokens)
        assert list(grouped) == ["f1", "f2"]
        for file_tokens in grouped.values():
            starts = [t.start for t in file_tokens]
            assert starts == sorted(starts)
        total = sum(len(v) for v in grouped.values())
        assert total == len(tokens)

    def test_empty(self):
        assert split_by_file([]) == {}


def _tok(base, pos, start, end):
    return PhoneToken(base, pos, "f", start, end)


class TestGroupWords:
    def test_b_to_e_unit(self):
        tokens = [
            _tok("K", "B", 0.0, 0.1),
            _tok("L", "I", 0.1, 0.2),
            _tok("AE1", "I", 0.2, 0.3),
            _tok("T", "E", 0.3, 0.4),
        ]
        result = group_words(tokens)
        assert len(result.units) == 1
        assert result.units[0].pron == ("K", "L", "AE1", "T")
        assert result.units[0].start == 0.0 and result.units[0].end == 0.4
        assert result.defects == []

    def test_singleton(self):
        result = group_words([_tok("AH0", "S", 0.0, 0.1)])
        assert result.units[0].pron == ("AH0",)

    def test_orphaned_internal(self):
        result = group_words([_tok("L", "I", 0.0, 0.1)])
        assert result.units == []
        assert len(result.defects) == 1
        assert result.defects[0].token_index == 0
        assert len(result.non_words) == 1

    def test_recovery_at_next_b(self):
        tokens = [
            _tok("L", "I", 0.0, 0.1),
            _tok("P", "B", 0.1, 0.2),
            _tok("AE1", "I", 0.2, 0.3),
            _tok("T", "E", 0.3, 0.4),
        ]
        result = group_words(tokens)
        assert [u.pron for u in result.units] == [("P", "AE1", "T")]
        assert len(result.defects) == 1

    def test_partition_property(self, corpus):
        entries, segments, table, _, _ = corpus
        tokens = to_file_times(resolve_phone_ids(entries, table), segments)
        for file_tokens in split_by_file(tokens).values():
            result = group_words(file_tokens)
            in_units = [t for u in result.units for t in u.phones]
            assert sorted(
                in_units + result.non_words, key=lambda t: (t.start, t.symbol)
            ) == sorted(file_tokens, key=lambda t: (t.start, t.symbol))

    def test_silence_goes_to_non_words(self):
        result = group_words([_tok("SIL", None, 0.0, 0.5)])
        assert result.non_words[0].phone_base == "SIL"
        assert result.defects == []


class TestMatchWords:
    def lex(self):
        return parse_lexicon("KLATT K L AE1 T\n")

    def unit(self):
        return group_words(
            [
                _tok("K", "B", 0.0, 0.1),
                _tok("L", "I", 0.1, 0.2),
                _tok("AE1", "I", 0.2, 0.3),
                _tok("T", "E", 0.3, 0.4),
            ]
        ).units[0]

    def test_reverse_lookup(self):
        (word,) = match_words([self.unit()], self.lex())
        assert word.word == "KLATT"
        assert word.pron == ("K", "L", "AE1", "T")

    def test_positional_reference(self):
        (word,) = match_words([self.unit()], self.lex(), ["KLATT"])
        assert word.word == "KLATT"

    def test_reference_mismatch(self):
        lex = parse_lexicon("KLATT K L AE1 T\nPAT P AE1 T\n")
        with pytest.raises(PronunciationMismatch):
            match_words([self.unit()], lex, ["PAT"])

    def test_homophones_ambiguous(self):
        # brute-force reverse index: both words share the pron
        lex = parse_lexicon("RIGHT R AY1 T\nWRITE R AY1 T\n")
        rev = {}
        for w, p in lex.entries:
            rev.setdefault(p, []).append(w)
        assert rev[("R", "AY1", "T")] == ["RIGHT", "WRITE"]
        unit = group_words(
            [
                _tok("R", "B", 0.0, 0.1),
                _tok("AY1", "I", 0.1, 0.2),
                _tok("T", "E", 0.2, 0.3),
            ]
        ).units[0]
        with pytest.raises(AmbiguousPron):
            match_words([unit], lex)

    def test_unknown_pron(self):
        with pytest.raises(PronunciationMismatch):
            match_words([self.unit()], parse_lexicon("PAT P AE1 T\n"))


class TestTiers:
    def test_phone_tier_gap_fill(self):
        tokens = [_tok("K_B", None, 1.0, 2.0), _tok("T_E", None, 3.0, 4.0)]
        tier = phones_to_tier(tokens, 10.0)
        assert tier.intervals[0] == Interval(0.0, 1.0, "")
        assert [iv.text for iv in tier.non_empty()] == ["K_B", "T_E"]
        assert tier.xmax == 10.0

    def test_token_beyond_duration(self):
        with pytest.raises(TokenBeyondDuration):
            phones_to_tier([_tok("K", None, 9.5, 10.2)], 10.0)

    def test_empty_tokens(self):
        tier = phones_to_tier([], 4.0)
        assert tier.intervals == (Interval(0.0, 4.0, ""),)

    def test_words_tier(self):
        words = match_words(
            [
                group_words(
                    [
                        _tok("K", "B", 1.0, 1.2),
                        _tok("L", "I", 1.2, 1.25),
                        _tok("AE1", "I", 1.25, 1.3),
                        _tok("T", "E", 1.3, 1.4),
                    ]
                ).units[0]
            ],
            parse_lexicon("KLATT K L AE1 T\n"),
        )
        tier = words_to_tier(words, 2.0)
        assert [
            (iv.text, iv.xmin, iv.xmax) for iv in tier.intervals
        ] == [("", 0.0, 1.0), ("KLATT", 1.0, 1.4), ("", 1.4, 2.0)]


class TestAlignmentTable:
    def test_header_and_round_trip(self, corpus):
        entries, segments, table, _, _ = corpus
        rows = alignment_rows(entries, segments, table)
        rendered = render_alignment_table(rows)
        assert rendered.splitlines()[0] == ALIGNMENT_HEADER
        back = parse_alignment_table(rendered)
        assert len(back) == len(rows)
        for a, b in zip(back, rows):
            assert (a.utt, a.file_id, a.phone_field, a.channel, a.phone) == (
                b.utt, b.file_id, b.phone_field, b.channel, b.phone
            )
            for field in ("start_in_utt", "dur", "utt_start", "utt_end",
                          "start", "end"):
                assert getattr(a, field) == pytest.approx(
                    getattr(b, field), abs=1e-6
                )
        # re-rendering the parsed table is byte-stable
        assert render_alignment_table(back) == rendered

    def test_raw_phone_field_preserved(self, corpus):
        entries, segments, table, _, _ = corpus
        rows = alignment_rows(entries, segments, table)
        numeric = [r for r in rows if r.utt == "s1_001"]
        assert numeric[0].phone_field == "1" and numeric[0].phone == "SIL"
        symbolic = [r for r in rows if r.utt == "s2_003"]
        assert symbolic[0].phone_field == "SIL"


class TestEndToEnd:
    def test_durations_from_segments(self, corpus):
        _, segments, _, _, _ = corpus
        assert corpus_durations(segments) == {"f1": 7.0, "f2": 7.0}

    def test_duration_conservation(self, corpus):
        entries, segments, table, _, _ = corpus
        ctm_total = sum(e.dur for e in entries)
        resolved = resolve_phone_ids(entries, table)
        assert sum(e.dur for e in resolved) == pytest.approx(ctm_total, abs=1e-9)
        tokens = to_file_times(resolved, segments)
        assert sum(t.duration for t in tokens) == pytest.approx(
            ctm_total, abs=1e-6
        )
        grouped_total = 0.0
        for file_tokens in split_by_file(tokens).values():
            result = group_words(file_tokens)
            grouped_total += sum(
                t.duration for u in result.units for t in u.phones
            )
            grouped_total += sum(t.duration for t in result.non_words)
        assert grouped_total == pytest.approx(ctm_total, abs=1e-6)

    def test_word_alignment_matches_hand_trace(self, corpus):
        entries, segments, table, lex, text = corpus
        resolved = resolve_phone_ids(entries, table)
        per_file = align_corpus(resolved, segments, lex, text)
        for fid, expected in (("f1", F1_WORDS), ("f2", F2_WORDS)):
            _, words = per_file[fid]
            got = [(w.word, w.start, w.end) for w in words]
            assert len(got) == len(expected)
            for (gw, gs, ge), (ew, es, ee) in zip(got, expected):
                assert gw == ew
                assert gs == pytest.approx(es, abs=1e-9)
                assert ge == pytest.approx(ee, abs=1e-9)

    def test_first_utterance_phones_match_hand_trace(self, corpus):
        entries, segments, table, _, _ = corpus
        resolved = resolve_phone_ids(entries, table)
        tokens = to_file_times(resolved, segments)
        first = [t for t in tokens if t.utt == "s1_001"]
        assert len(first) == len(F1_FIRST_PHONES)
        for token, (symbol, start, end) in zip(first, F1_FIRST_PHONES):
            assert token.symbol == symbol
            assert token.start == pytest.approx(start, abs=1e-9)
            assert token.end == pytest.approx(end, abs=1e-9)

    def test_pron_reconstruction_exact(self, corpus):
        entries, segments, table, lex, text = corpus
        resolved = resolve_phone_ids(entries, table)
        per_file = align_corpus(resolved, segments, lex, text)
        for _, words in per_file.values():
            for w in words:
                assert w.pron in lex.prons(w.word)

    def test_textgrids_match_goldens(self, corpus, fixtures):
        entries, segments, table, lex, text = corpus
        resolved = resolve_phone_ids(entries, table)
        durations = corpus_durations(segments)
        per_file = align_corpus(resolved, segments, lex, text)
        for fid, (tokens, words) in per_file.items():
            grid = TextGrid(
                0.0,
                durations[fid],
                (
                    phones_to_tier(tokens, durations[fid]),
                    words_to_tier(words, durations[fid]),
                ),
            )
            golden = (fixtures / "golden" / f"{fid}.TextGrid").read_bytes()
            assert write_textgrid(grid) == golden
            reparsed = parse_textgrid(golden)
            got_words = [
                (iv.text, iv.xmin, iv.xmax)
                for iv in reparsed.tiers[1].non_empty()
            ]
            expected = F1_WORDS if fid == "f1" else F2_WORDS
            assert got_words == [
                (w, pytest.approx(s, abs=1e-6), pytest.approx(e, abs=1e-6))
                for w, s, e in expected
            ]


class TestSilenceClassConfig:
    def test_unexpected_suffixless_symbol_is_defect(self):
        result = group_words([_tok("NOISE", None, 0.0, 0.5)])
        assert len(result.defects) == 1
        assert result.non_words[0].phone_base == "NOISE"

    def test_configured_silence_accepted(self):
        result = group_words(
            [_tok("NOISE", None, 0.0, 0.5)], silence_symbols={"NOISE"}
        )
        assert result.defects == []
