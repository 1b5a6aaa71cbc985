import numpy as np
import pytest

from charcnn.alphabet import BLANK_INDEX, build_alphabet
from charcnn.encoding import EncodedDoc, corpus_checksum, encode, read_corpus


class TestAlphabet:
    def test_exactly_105_symbols(self):
        assert len(build_alphabet()) == 105

    def test_membership(self):
        alphabet = build_alphabet()
        assert "ă" in alphabet  # ă
        assert "ß" not in alphabet  # ß
        assert alphabet.encode_char("ă") >= 1
        assert alphabet.encode_char("ß") == BLANK_INDEX

    def test_bijection_round_trip(self):
        alphabet = build_alphabet()
        indices = [alphabet.encode_char(s) for s in alphabet.symbols]
        assert sorted(indices) == list(range(1, 106))
        for symbol, idx in zip(alphabet.symbols, indices):
            assert alphabet.symbols[idx - 1] == symbol

    def test_cedilla_variants_alias_to_comma_below(self):
        alphabet = build_alphabet()
        assert alphabet.encode_char("ş") == alphabet.encode_char("ș")  # ş = ș
        assert alphabet.encode_char("ţ") == alphabet.encode_char("ț")  # ţ = ț
        assert alphabet.encode_char("Ş") == alphabet.encode_char("Ș")
        assert alphabet.encode_char("Ţ") == alphabet.encode_char("Ț")

    def test_expected_composition(self):
        symbols = build_alphabet().symbols
        assert sum(1 for s in symbols if s.isdigit()) == 10
        assert sum(1 for s in symbols if s.isalpha()) == 62  # 52 ASCII + 10 diacritics
        assert " " in symbols and "#" in symbols


class TestEncode:
    def test_empty_text_all_pad(self):
        doc = encode("", build_alphabet())
        assert doc.true_length == 0
        assert doc.indices.shape == (5000,)
        assert not doc.indices.any()

    def test_long_document_truncated(self):
        doc = encode("x" * 6000, build_alphabet())
        assert doc.true_length == 5000
        assert doc.indices.shape == (5000,)

    def test_mixed_characters(self):
        doc = encode("aA1ș", build_alphabet())
        head = doc.indices[:4]
        assert (head >= 1).all() and len(set(head.tolist())) == 4
        assert not doc.indices[4:].any()
        assert doc.true_length == 4

    def test_unknown_encodes_to_blank(self):
        doc = encode("aßb", build_alphabet())
        assert doc.indices[1] == BLANK_INDEX

    def test_deterministic(self):
        a = encode("un text oarecare", build_alphabet())
        b = encode("un text oarecare", build_alphabet())
        assert np.array_equal(a.indices, b.indices)

    def test_invariant_checked(self):
        with pytest.raises(ValueError):
            EncodedDoc(indices=np.zeros(10, dtype=np.int64), true_length=11)


class TestCorpusIO:
    def test_read_and_checksum(self, tmp_path):
        from conftest import write_dialect_corpus

        root = write_dialect_corpus(tmp_path / "c", per_dialect=15, seed=1)
        corpus = read_corpus(root)
        assert set(corpus) == {"train", "validation", "test"}
        assert all(d.dialect in ("MD", "RO") for d in corpus["train"])
        c1 = corpus_checksum(root)
        c2 = corpus_checksum(root)
        assert c1 == c2 and len(c1) == 64

    def test_checksum_matches_kernel_toolkit(self, tmp_path):
        # the kernel-side package must agree on canonical-corpus checksums,
        # otherwise merged reports would disagree about the corpus identity
        dialect_bench = pytest.importorskip("dialect_bench.corpus")
        from conftest import write_dialect_corpus

        root = write_dialect_corpus(tmp_path / "c", per_dialect=15, seed=2)
        theirs = dialect_bench.corpus_checksum(dialect_bench.load_corpus(root))
        assert corpus_checksum(root) == theirs

    def test_missing_subset(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_corpus(tmp_path)
