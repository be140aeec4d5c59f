import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bepath.corpus import Corpus, DEFAULT_CLASS_MIX, GeneratorSpec, generate_synthetic
from bepath.preprocess import (
    DEFAULT_DIAGNOSIS_HEADINGS,
    DEFAULT_TERMINATOR_HEADINGS,
    HeadingLexicon,
    NoDiagnosisSection,
    clean_text,
    extract_subsection,
    preprocess_corpus,
)


class TestCleanText:
    def test_punctuation_run_collapsed(self):
        assert clean_text("DIAGNOSIS:::   Barrett's") == "DIAGNOSIS: Barrett's"

    def test_two_repeats_kept(self):
        # Only runs of three or more collapse; ".." is legitimate.
        assert clean_text("see p. 4..") == "see p. 4.."
        assert clean_text("wait....") == "wait."

    def test_mixed_punctuation_not_collapsed(self):
        assert clean_text("?!?") == "?!?"

    def test_line_endings_normalized(self):
        assert clean_text("a\r\nb\rc") == "a\nb\nc"

    def test_trailing_space_trimmed_per_line(self):
        assert clean_text("a  \nb\t\t\n") == "a\nb\n"

    def test_fixed_point_on_clean_input(self):
        text = "FINAL DIAGNOSIS:\nA. ESOPHAGUS, BIOPSY:\n- Squamous mucosa.\n"
        assert clean_text(text) == text

    def test_idempotent_over_synthetic_reports(self):
        corpus = generate_synthetic(
            GeneratorSpec(n_patients=400, class_mix=DEFAULT_CLASS_MIX, seed=31)
        )
        assert len(corpus.reports) >= 1000
        for report in corpus.reports[:1000]:
            once = clean_text(report.full_text)
            assert clean_text(once) == once
            assert len(once) <= len(report.full_text)

    @settings(max_examples=200, deadline=None)
    @given(st.text())
    def test_idempotent_and_never_longer(self, text):
        once = clean_text(text)
        assert clean_text(once) == once
        assert len(once) <= len(text)


class TestExtractSubsection:
    def test_single_block(self):
        text = (
            "Patient: John Doe\n"
            "FINAL DIAGNOSIS:\n"
            "Barrett's esophagus with high-grade dysplasia.\n"
            "ELECTRONICALLY SIGNED BY DR X\n"
        )
        assert extract_subsection(text) == (
            "FINAL DIAGNOSIS:\nBarrett's esophagus with high-grade dysplasia."
        )

    def test_no_heading_raises(self):
        with pytest.raises(NoDiagnosisSection):
            extract_subsection("CLINICAL HISTORY:\nGERD.\n")

    def test_multiple_blocks_joined(self):
        text = (
            "DIAGNOSIS:\nfirst part\n"
            "COMMENT: see below\n"
            "PATHOLOGIC DIAGNOSIS:\nsecond part\n"
        )
        assert extract_subsection(text) == (
            "DIAGNOSIS:\nfirst part\nPATHOLOGIC DIAGNOSIS:\nsecond part"
        )

    def test_new_diagnosis_heading_starts_new_block(self):
        text = "DIAGNOSIS:\na\nDIAGNOSIS:\nb\n"
        assert extract_subsection(text) == "DIAGNOSIS:\na\nDIAGNOSIS:\nb"

    def test_heading_match_is_case_insensitive_and_indented(self):
        assert extract_subsection("  Final Diagnosis\nx") == "  Final Diagnosis\nx"

    def test_heading_requires_boundary(self):
        with pytest.raises(NoDiagnosisSection):
            extract_subsection("DIAGNOSISX\nnope")
        assert extract_subsection("DIAGNOSIS-\nyes") == "DIAGNOSIS-\nyes"

    def test_longest_heading_wins_over_prefix(self):
        # "PATHOLOGIC DIAGNOSIS" must not be treated as the shorter
        # "DIAGNOSIS" pattern; both are diagnosis headings, so what
        # matters is that matching does not split the line.
        text = "PATHOLOGIC DIAGNOSIS: benign\n"
        assert extract_subsection(text) == "PATHOLOGIC DIAGNOSIS: benign"

    def test_terminator_ends_block(self):
        text = "DIAGNOSIS:\nkeep\nGROSS DESCRIPTION:\ndrop\n"
        assert extract_subsection(text) == "DIAGNOSIS:\nkeep"

    def test_trailing_blank_lines_dropped(self):
        text = "DIAGNOSIS:\nkeep\n\n\n"
        assert extract_subsection(text) == "DIAGNOSIS:\nkeep"

    def test_custom_lexicon(self):
        lexicon = HeadingLexicon(
            diagnosis_headings=("IMPRESSION",), terminator_headings=("ADDENDUM",)
        )
        text = "IMPRESSION:\nfine\nADDENDUM:\nlater\n"
        assert extract_subsection(text, lexicon) == "IMPRESSION:\nfine"
        with pytest.raises(ValueError):
            HeadingLexicon(diagnosis_headings=())


class TestPreprocessCorpus:
    def test_synthetic_corpus_fully_sectioned(self, small_corpus):
        processed, rejects = preprocess_corpus(small_corpus, mode="subsection")
        assert rejects == []
        assert len(processed.reports) == len(small_corpus.reports)
        for report in processed.reports:
            assert report.sub_section_text
            # Sub-section lines all come from the cleaned full text.
            cleaned_lines = set(clean_text(report.full_text).split("\n"))
            for line in report.sub_section_text.split("\n"):
                assert line in cleaned_lines

    def test_full_mode_cleans_without_extracting(self, small_corpus):
        processed, rejects = preprocess_corpus(small_corpus, mode="full")
        assert rejects == []
        for report in processed.reports:
            assert report.sub_section_text is None
            assert clean_text(report.full_text) == report.full_text

    def test_heading_free_report_rejected_but_retained(self, small_corpus):
        headless = dataclasses.replace(
            small_corpus.reports[0],
            report_id="no-heading",
            full_text="CLINICAL HISTORY:\nGERD only.\n",
        )
        corpus = Corpus([headless] + list(small_corpus.reports[1:5]))
        processed, rejects = preprocess_corpus(corpus, mode="subsection")
        assert rejects == ["no-heading"]
        assert len(processed.reports) == 5
        assert processed.by_id()["no-heading"].sub_section_text is None

    def test_default_lexicon_values(self):
        assert "FINAL DIAGNOSIS" in DEFAULT_DIAGNOSIS_HEADINGS
        assert "ELECTRONICALLY SIGNED" in DEFAULT_TERMINATOR_HEADINGS
