from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dialect_bench.kernel import (
    CacheInvalidError,
    CountProfile,
    DocumentProfiles,
    GramVocabulary,
    HashCollisionError,
    KernelConfig,
    KernelError,
    KernelKind,
    NGramProfile,
    export_gram_text,
    extract_count_profile,
    extract_profile,
    gram_matrix,
    intersection_kernel,
    kernel_value,
    load_gram,
    load_profiles,
    presence_kernel,
    profile_document,
    profile_documents,
    save_gram,
    save_profiles,
    window_fingerprints,
)
from dialect_bench.synthetic import surrogate_samples

# ---------------------------------------------------------------------------
# Independent oracles: exhaustive enumeration over raw substrings.


def oracle_presence(x: str, y: str, n: int) -> int:
    xs = {x[i : i + n] for i in range(len(x) - n + 1)}
    ys = {y[i : i + n] for i in range(len(y) - n + 1)}
    return len(xs & ys)


def oracle_intersection(x: str, y: str, n: int) -> int:
    cx = Counter(x[i : i + n] for i in range(len(x) - n + 1))
    cy = Counter(y[i : i + n] for i in range(len(y) - n + 1))
    return sum(min(cx[g], cy[g]) for g in cx.keys() & cy.keys())


small_text = st.text(alphabet="abcde", max_size=50)


class TestExtractProfile:
    def test_abc_bigrams(self):
        p = extract_profile("abc", 2)
        assert p.self_value == 2
        assert p.grams.size == 2

    def test_repetition_collapses(self):
        assert extract_profile("aaaa", 2).self_value == 1

    def test_short_text_empty(self):
        p = extract_profile("ab", 3)
        assert p.self_value == 0
        assert p.grams.size == 0

    def test_pure_function_of_text_and_n(self):
        a = extract_profile("textul acesta", 4)
        b = extract_profile("textul acesta", 4)
        assert np.array_equal(a.grams, b.grams)

    def test_spaces_inside_windows(self):
        # windows spanning spaces must be distinct features
        assert oracle_presence(" sînt ", " sînt ", 3) == extract_profile(" sînt ", 3).self_value

    def test_invalid_n(self):
        with pytest.raises(ValueError):
            window_fingerprints("abc", 0)


class TestPresenceKernel:
    def test_shared_bigram(self):
        assert presence_kernel(extract_profile("abab", 2), extract_profile("ab", 2)) == 1

    def test_diagonal_is_self_value(self):
        p = extract_profile("abc", 2)
        assert presence_kernel(p, p) == p.self_value == 2

    def test_mismatched_n_rejected(self):
        with pytest.raises(KernelError, match="mismatch"):
            presence_kernel(extract_profile("abc", 2), extract_profile("abc", 3))

    @given(x=small_text, y=small_text, n=st.integers(min_value=1, max_value=6))
    @settings(max_examples=200, deadline=None)
    def test_matches_enumeration_oracle(self, x, y, n):
        got = presence_kernel(extract_profile(x, n), extract_profile(y, n))
        assert got == oracle_presence(x, y, n)

    @given(x=small_text, y=small_text, n=st.integers(min_value=1, max_value=6))
    @settings(max_examples=100, deadline=None)
    def test_symmetry(self, x, y, n):
        p, q = extract_profile(x, n), extract_profile(y, n)
        assert presence_kernel(p, q) == presence_kernel(q, p)


class TestIntersectionKernel:
    def test_min_counts(self):
        assert (
            intersection_kernel(extract_count_profile("aaa", 2), extract_count_profile("aa", 2))
            == 1
        )

    def test_self_counts_positions(self):
        p = extract_count_profile("abab", 2)
        assert intersection_kernel(p, p) == 3 == p.self_value

    def test_support_matches_presence_grams(self):
        text = "abracadabra"
        cp = extract_count_profile(text, 3)
        pp = extract_profile(text, 3)
        assert np.array_equal(cp.grams, pp.grams)
        assert (cp.counts >= 1).all()

    @given(x=small_text, y=small_text, n=st.integers(min_value=1, max_value=6))
    @settings(max_examples=200, deadline=None)
    def test_matches_min_count_oracle(self, x, y, n):
        got = intersection_kernel(extract_count_profile(x, n), extract_count_profile(y, n))
        assert got == oracle_intersection(x, y, n)


class TestKernelValue:
    def test_normalized_self_is_one(self):
        cfg = KernelConfig(n_low=2, n_high=3, normalize=True)
        d = profile_document("abcab", cfg, "x")
        assert kernel_value(d, d, cfg) == 1.0

    def test_degenerate_range_equals_single_length(self):
        cfg = KernelConfig(n_low=2, n_high=2, normalize=False)
        dx = profile_document("abcab", cfg, "x")
        dy = profile_document("bcab", cfg, "y")
        assert kernel_value(dx, dy, cfg) == oracle_presence("abcab", "bcab", 2)

    @given(x=small_text, y=small_text)
    @settings(max_examples=100, deadline=None)
    def test_range_sum_matches_oracle_sum(self, x, y):
        cfg = KernelConfig(n_low=2, n_high=3, normalize=False)
        dx = profile_document(x, cfg, "x")
        dy = profile_document(y, cfg, "y")
        expected = oracle_presence(x, y, 2) + oracle_presence(x, y, 3)
        assert kernel_value(dx, dy, cfg) == expected

    def test_zero_self_value_normalizes_to_zero(self):
        cfg = KernelConfig(n_low=4, n_high=4, normalize=True)
        dx = profile_document("ab", cfg, "x")  # shorter than n
        dy = profile_document("abcdef", cfg, "y")
        assert kernel_value(dx, dy, cfg) == 0.0

    def test_missing_length_rejected(self):
        cfg2 = KernelConfig(n_low=2, n_high=2, normalize=False)
        cfg23 = KernelConfig(n_low=2, n_high=3, normalize=False)
        d = profile_document("abcd", cfg2, "x")
        with pytest.raises(KernelError, match="no profile"):
            kernel_value(d, d, cfg23)

    @given(x=small_text, y=small_text)
    @settings(max_examples=100, deadline=None)
    def test_normalized_bounds(self, x, y):
        cfg = KernelConfig(n_low=1, n_high=3, normalize=True)
        v = kernel_value(profile_document(x, cfg), profile_document(y, cfg), cfg)
        assert 0.0 <= v <= 1.0 + 1e-12


class TestGramMatrix:
    def _docs(self, texts, cfg):
        return [profile_document(t, cfg, f"d{i}") for i, t in enumerate(texts)]

    def test_identical_documents_all_ones(self):
        cfg = KernelConfig(normalize=True, n_low=2, n_high=2)
        docs = self._docs(["acelasi text"] * 3, cfg)
        g = gram_matrix(docs, None, cfg)
        assert g.symmetric
        assert np.allclose(g.values, 1.0)

    def test_disjoint_documents_zero_off_diagonal(self):
        cfg = KernelConfig(normalize=False, n_low=2, n_high=2)
        docs = self._docs(["aaaa", "bbbb"], cfg)
        g = gram_matrix(docs, None, cfg)
        assert g.values[0, 1] == 0 and g.values[1, 0] == 0

    def test_cells_match_kernel_value(self):
        for kind in KernelKind:
            for normalize in (False, True):
                cfg = KernelConfig(kind=kind, n_low=1, n_high=3, normalize=normalize)
                rows = self._docs(["abcab", "zzz", "cababc", "a"], cfg)
                cols = self._docs(["bca", "abcabc"], cfg)
                g = gram_matrix(rows, cols, cfg)
                for i, r in enumerate(rows):
                    for j, c in enumerate(cols):
                        assert g.values[i, j] == pytest.approx(
                            kernel_value(r, c, cfg), abs=1e-12
                        )

    def test_psd_on_random_documents(self):
        rng = np.random.default_rng(42)
        cfg = KernelConfig(normalize=True, n_low=2, n_high=3)
        texts = [
            "".join(rng.choice(list("abcdef "), size=rng.integers(10, 60)))
            for _ in range(20)
        ]
        docs = self._docs(texts, cfg)
        g = gram_matrix(docs, None, cfg)
        eigvals = np.linalg.eigvalsh(g.values)
        assert eigvals.min() >= -1e-8 * g.values.diagonal().max()

    def test_workers_do_not_change_result(self):
        cfg = KernelConfig(normalize=True)
        samples = surrogate_samples(20, seed=3)
        docs = [profile_document(s.text, cfg, s.id) for s in samples]
        g1 = gram_matrix(docs, None, cfg, workers=1)
        g4 = gram_matrix(docs, None, cfg, workers=4)
        assert np.array_equal(g1.values, g4.values)

    def test_empty_collection_rejected(self):
        cfg = KernelConfig()
        with pytest.raises(KernelError, match="empty"):
            gram_matrix([], None, cfg)

    def test_intersection_gram_matches_pairwise(self):
        cfg = KernelConfig(kind=KernelKind.INTERSECTION, n_low=2, n_high=2, normalize=False)
        texts = ["aabab", "ababab", "bb", "aa aa aa"]
        docs = self._docs(texts, cfg)
        g = gram_matrix(docs, None, cfg)
        for i, x in enumerate(texts):
            for j, y in enumerate(texts):
                assert g.values[i, j] == oracle_intersection(x, y, 2)


class TestVocabularyAndCollisions:
    def test_vocab_records_raw_windows(self):
        vocab = GramVocabulary()
        p = extract_profile("abcd", 2, vocab=vocab)
        assert len(vocab) == 3
        windows = {vocab.window(fp) for fp in p.grams.tolist()}
        assert windows == {"ab", "bc", "cd"}

    def test_collision_detected(self):
        vocab = GramVocabulary()
        fps = np.array([7, 7], dtype=np.uint64)
        with pytest.raises(HashCollisionError):
            vocab.record(fps, ["ab", "cd"])

    def test_no_collisions_on_surrogate_training_set(self):
        # corpus-scale audit of the 64-bit fingerprints
        vocab = GramVocabulary()
        for s in surrogate_samples(150, seed=9):
            vocab.record_text(s.text, 6)
        assert len(vocab) > 0


class TestSerialization:
    def test_gram_round_trip(self, tmp_path):
        cfg = KernelConfig(normalize=True, n_low=2, n_high=3)
        docs = [profile_document(t, cfg, f"d{i}") for i, t in enumerate(["abcab", "bcabc"])]
        g = gram_matrix(docs, None, cfg)
        path = tmp_path / "gram.bin"
        save_gram(g, path)
        loaded = load_gram(path)
        assert loaded.row_refs == g.row_refs
        assert loaded.symmetric == g.symmetric
        assert loaded.config == g.config
        assert np.array_equal(loaded.values, g.values)

    def test_gram_text_export(self, tmp_path):
        cfg = KernelConfig(normalize=False, n_low=2, n_high=2)
        docs = [profile_document(t, cfg, f"d{i}") for i, t in enumerate(["ab", "abab"])]
        g = gram_matrix(docs, None, cfg)
        path = tmp_path / "gram.tsv"
        export_gram_text(g, path)
        lines = path.read_text().splitlines()
        assert len(lines) == 4
        assert lines[0].split("\t")[:2] == ["d0", "d0"]

    @pytest.mark.parametrize("kind", list(KernelKind))
    def test_profile_cache_round_trip(self, tmp_path, kind):
        cfg = KernelConfig(kind=kind, n_low=2, n_high=3)
        texts = ["abcab", "zz"]
        docs = [profile_document(t, cfg, f"d{i}") for i, t in enumerate(texts)]
        path = tmp_path / "cache.bin"
        save_profiles(docs, cfg, "checksum123", path)
        loaded = load_profiles(path, cfg, "checksum123")
        assert len(loaded) == len(docs)
        for a, b in zip(loaded, docs):
            assert a.doc_ref == b.doc_ref
            for n in cfg.lengths:
                assert np.array_equal(a.profile(n).grams, b.profile(n).grams)
                if kind is KernelKind.INTERSECTION:
                    assert np.array_equal(a.profile(n).counts, b.profile(n).counts)

    def test_cache_invalidated_on_checksum_mismatch(self, tmp_path):
        cfg = KernelConfig()
        docs = [profile_document("abcdef", cfg, "d0")]
        path = tmp_path / "cache.bin"
        save_profiles(docs, cfg, "checksum-a", path)
        with pytest.raises(CacheInvalidError, match="checksum"):
            load_profiles(path, cfg, "checksum-b")

    def test_cache_invalidated_on_config_mismatch(self, tmp_path):
        cfg = KernelConfig(n_low=2, n_high=2)
        docs = [profile_document("abcdef", cfg, "d0")]
        path = tmp_path / "cache.bin"
        save_profiles(docs, cfg, "c", path)
        other = KernelConfig(n_low=2, n_high=2, hash_seed=1)
        with pytest.raises(CacheInvalidError, match="config"):
            load_profiles(path, other, "c")


class TestProfileDocuments:
    def test_order_stable_and_worker_independent(self):
        cfg = KernelConfig()
        texts = [s.text for s in surrogate_samples(10, seed=1)]
        serial = profile_documents(texts, cfg, workers=1)
        parallel = profile_documents(texts, cfg, workers=4)
        for a, b in zip(serial, parallel):
            assert a.doc_ref == b.doc_ref
            assert np.array_equal(a.profile(6).grams, b.profile(6).grams)

    def test_config_bounds(self):
        with pytest.raises(ValueError):
            KernelConfig(n_low=0)
        with pytest.raises(ValueError):
            KernelConfig(n_low=3, n_high=2)
        with pytest.raises(ValueError):
            KernelConfig(n_low=1, n_high=17)
