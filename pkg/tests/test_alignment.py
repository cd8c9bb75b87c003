import numpy as np
import pytest

from neutrality_kit.alignment import (
    Alignment,
    AlignmentError,
    SiteClass,
    classify_sites,
    from_sequences,
    pair_diff_counts,
    parse_fasta,
    pooled_frequencies,
    site_classification_tsv,
    site_pair_diff_count,
    sitewise_frequencies,
)
from conftest import random_alignment
from _oracles import brute_pair_diff


# ---------------------------------------------------------------- parsing

def test_parse_single_record_rejected():
    with pytest.raises(AlignmentError, match="no pairs"):
        parse_fasta(">s\nACGT\n")


def test_parse_empty_input_rejected():
    with pytest.raises(AlignmentError):
        parse_fasta("")


def test_parse_ragged_rows_name_offender():
    with pytest.raises(AlignmentError, match="'b'"):
        parse_fasta(">a\nACGT\n>b\nACG\n")


def test_parse_table_fixture(table_fixture):
    assert table_fixture.n == 5
    assert table_fixture.num_sites == 16
    assert table_fixture.labels == ("a", "b", "c", "d", "e")


def test_parse_case_insensitive_and_wrapped():
    aln = parse_fasta(">x\nac\ngt\n>y\nAC\nGT\n")
    assert aln.num_sites == 4
    assert np.array_equal(aln.codes[0], aln.codes[1])


def test_masking_policy_drops_whole_columns():
    aln = parse_fasta(">x\nA-CGT\n>y\nAACGN\n")
    # column 2 has '-', column 5 has 'N': both masked
    assert aln.masked_sites == (2, 5)
    assert aln.num_sites == 3
    assert list(aln.site_index) == [1, 3, 4]


def test_all_columns_masked_rejected():
    with pytest.raises(AlignmentError, match="masked"):
        parse_fasta(">x\n--\n>y\nAA\n")


def test_duplicate_labels_rejected():
    with pytest.raises(AlignmentError, match="unique"):
        from_sequences(["a", "a"], ["ACGT", "ACGT"])


# ---------------------------------------------------------- classification

def test_table_fixture_classification(table_fixture):
    cls = classify_sites(table_fixture)
    assert cls.s == 16
    assert cls.s_star == 9
    assert cls.singleton_positions == (3, 5, 6, 7, 8, 11, 12, 13, 15)
    # site 4 has two distinct minority codes: segregating but not a singleton
    assert cls.classes[3] is SiteClass.OTHER_SEGREGATING


def test_constant_column_is_non_segregating():
    aln = from_sequences(["x", "y", "z"], ["AA", "AC", "AG"])
    cls = classify_sites(aln)
    assert cls.classes[0] is SiteClass.NON_SEGREGATING
    assert cls.classes[1] is SiteClass.OTHER_SEGREGATING


def test_class_counts_partition_sites():
    rng = np.random.default_rng(11)
    for _ in range(20):
        aln = random_alignment(rng, int(rng.integers(2, 9)), int(rng.integers(1, 30)))
        cls = classify_sites(aln)
        counts = cls.class_counts()
        assert sum(counts.values()) == aln.num_sites
        assert cls.s_star <= cls.s <= aln.num_sites


def test_classification_invariant_under_row_permutation():
    rng = np.random.default_rng(5)
    for _ in range(10):
        aln = random_alignment(rng, 6, 25)
        perm = rng.permutation(6)
        shuffled = Alignment(
            labels=tuple(aln.labels[i] for i in perm),
            codes=aln.codes[perm],
            site_index=aln.site_index,
        )
        a, b = classify_sites(aln), classify_sites(shuffled)
        assert a.classes == b.classes
        assert (a.s, a.s_star) == (b.s, b.s_star)


# ------------------------------------------------------- pair differences

def test_table_fixture_pair_diff_counts(table_fixture):
    expected = [6, 6, 4, 7, 4, 4, 4, 4, 6, 6, 4, 4, 4, 6, 4, 6]
    assert pair_diff_counts(table_fixture).tolist() == expected


def test_site_pair_diff_examples():
    assert site_pair_diff_count([3, 3, 1, 1, 1]) == 6  # T,T,C,C,C
    assert site_pair_diff_count([0, 3, 1, 1, 1]) == 7  # A,T,C,C,C
    assert site_pair_diff_count([0, 0, 0, 0]) == 0


def test_pair_diff_matches_brute_force_double_loop():
    rng = np.random.default_rng(17)
    for _ in range(50):
        n = int(rng.integers(2, 31))
        column = rng.integers(0, 4, size=n)
        assert site_pair_diff_count(column) == brute_pair_diff(column)


# ------------------------------------------------------------ frequencies

def test_sitewise_frequencies_constant_column():
    aln = from_sequences(["1", "2", "3", "4", "5"], ["AC"] * 5)
    freqs = sitewise_frequencies(aln)
    assert freqs[0].tolist() == [1.0, 0.0, 0.0, 0.0]


def test_sitewise_frequencies_table_site_one(table_fixture):
    freqs = sitewise_frequencies(table_fixture, [0])
    # column T,T,C,C,C -> A:0 C:0.6 G:0 T:0.4
    assert freqs[0].tolist() == [0.0, 0.6, 0.0, 0.4]


def test_two_sequence_mismatch_column_is_half_half():
    aln = from_sequences(["x", "y"], ["AG", "AT"])
    freqs = sitewise_frequencies(aln, [1])
    assert sorted(freqs[0].tolist()) == [0.0, 0.0, 0.5, 0.5]


def test_frequency_rows_sum_to_one_and_recover_counts():
    rng = np.random.default_rng(23)
    for _ in range(10):
        aln = random_alignment(rng, int(rng.integers(2, 12)), 20)
        freqs = sitewise_frequencies(aln)
        assert np.abs(freqs.sum(axis=1) - 1.0).max() < 1e-12
        counts = freqs * aln.n
        assert np.abs(counts - np.rint(counts)).max() < 1e-9


def test_pooled_frequency_examples():
    aln = from_sequences(["x", "y", "z"], ["A", "A", "A"] )
    assert pooled_frequencies(aln, [0]).tolist() == [1.0, 0.0, 0.0, 0.0]
    aln2 = from_sequences(["x", "y"], ["AC", "AC"])
    assert pooled_frequencies(aln2, [0, 1]).tolist() == [0.5, 0.5, 0.0, 0.0]


def test_pooled_frequencies_empty_site_set_rejected(table_fixture):
    with pytest.raises(AlignmentError, match="empty"):
        pooled_frequencies(table_fixture, np.zeros(16, dtype=bool))


def test_pooled_turtle_vector_fixture():
    # Constant columns in the published proportions: 3913/2727/2372/988 of
    # A/C/G/T columns pool to (0.3913, 0.2727, 0.2372, 0.0988).
    cols = "A" * 3913 + "C" * 2727 + "G" * 2372 + "T" * 988
    aln = from_sequences(["x", "y"], [cols, cols])
    pooled = pooled_frequencies(aln, np.arange(10000))
    assert np.allclose(pooled, [0.3913, 0.2727, 0.2372, 0.0988], atol=1e-12)


# ------------------------------------------------------------------ export

def test_site_classification_tsv(table_fixture):
    text = site_classification_tsv(table_fixture)
    lines = text.strip().split("\n")
    assert lines[0].split("\t") == [
        "site_index", "class", "count_A", "count_C", "count_G", "count_T", "pair_diff_count",
    ]
    assert len(lines) == 17
    first = lines[1].split("\t")
    assert first[0] == "1" and first[-1] == "6"
    assert lines[3].split("\t")[1] == "singleton"


def test_subset_sites_keeps_original_positions(table_fixture):
    sub = table_fixture.subset_sites([2, 4, 5])
    assert list(sub.site_index) == [3, 5, 6]
    assert sub.num_sites == 3
