"""Bundled 5-sequence, 16-site demo alignment and its walkthrough printer."""

from math import comb

from .alignment import (
    classify_sites,
    from_sequences,
    pair_diff_counts,
)
from .estimators import (
    T2Mode,
    harmonic_coefficients,
    nucleotide_diversity,
    tajima_d,
    watterson_theta,
)

DEMO_LABELS = ("a", "b", "c", "d", "e")
DEMO_SEQUENCES = (
    "TCTACCTCCTCGGTTA",
    "TCCTACCTCCTGGTTT",
    "CTCCCCCTCTTTGCTA",
    "CTCCCCCTTCTGACTT",
    "CTCCCTCTTTTGGCCA",
)


def demo_alignment():
    return from_sequences(DEMO_LABELS, DEMO_SEQUENCES)


def demo_fasta() -> str:
    return "".join(f">{lb}\n{seq}\n" for lb, seq in zip(DEMO_LABELS, DEMO_SEQUENCES))


def demo_walkthrough() -> str:
    """Human-readable tour of the demo alignment's summary statistics."""
    aln = demo_alignment()
    cls = classify_sites(aln)
    diffs = pair_diff_counts(aln)
    lines = []
    width = 3
    header = "site  " + "".join(f"{int(p):>{width}}" for p in aln.site_index)
    lines.append(header)
    for i, label in enumerate(aln.labels):
        row = "".join(f"{'ACGT'[c]:>{width}}" for c in aln.codes[i])
        lines.append(f"{label:<6}" + row)
    lines.append("pair differences per site: " + "".join(f"({int(d)})" for d in diffs))
    lines.append("")
    lines.append(f"S = {cls.s}")
    singles = " ".join(str(p) for p in cls.singleton_positions)
    lines.append(f"singleton sites: {singles}  (S* = {cls.s_star})")
    lines.append("")
    t2_seg = nucleotide_diversity(aln, T2Mode.PER_SEGREGATING_SITE)
    t2_pair = nucleotide_diversity(aln, T2Mode.PER_PAIR)
    t2_site = nucleotide_diversity(aln, T2Mode.PER_SITE_PER_PAIR)
    lines.append(f"T2 (per segregating site) = {t2_seg:.2f}")
    lines.append(f"T2 (per pair)             = {t2_pair:.2f}")
    lines.append(f"T2 (per site per pair)    = {t2_site:.5f}")
    h = harmonic_coefficients(aln.n)
    t1 = watterson_theta(cls.s, aln.n)
    lines.append(f"T1 (Watterson, a_n = {h.a_n:.6f}) = {t1:.2f}")
    taj = tajima_d(aln)
    lines.append(f"D1 = T2(per pair) - T1    = {taj.d1:.2f}")
    lines.append(f"pairs compared: {comb(aln.n, 2)}; total differences: {int(diffs.sum())}")
    return "\n".join(lines) + "\n"
