"""FASTA alignment handling: parsing, masking, site classification, frequencies.

Only the four canonical nucleotides A, C, G, T enter any statistic. A column
containing anything else (gaps, N, ambiguity codes) is masked out of the
statistical view entirely; the original 1-based positions of masked columns
are kept for the audit trail, and kept columns remember their original
positions so reports can refer to them.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

NUCLEOTIDES = "ACGT"
N_CATEGORIES = len(NUCLEOTIDES)

_CODE_OF = {base: code for code, base in enumerate(NUCLEOTIDES)}


class AlignmentError(ValueError):
    """Malformed or statistically unusable alignment input."""


@dataclass(frozen=True)
class Alignment:
    """Aligned sequences over A/C/G/T, masked columns already removed.

    Attributes:
        labels: unique sequence names, input order preserved.
        codes: (n, K) uint8 matrix of category codes (A=0, C=1, G=2, T=3).
        site_index: (K,) 1-based original column positions of the kept sites.
        masked_sites: 1-based original positions of columns dropped by masking.
    """

    labels: tuple
    codes: np.ndarray
    site_index: np.ndarray
    masked_sites: tuple = ()

    def __post_init__(self):
        codes = np.ascontiguousarray(np.asarray(self.codes, dtype=np.uint8))
        if codes.ndim != 2:
            raise AlignmentError("codes must be a 2-d (sequences x sites) matrix")
        n, k = codes.shape
        if n < 2:
            raise AlignmentError("need at least 2 sequences (no pairs exist)")
        if k < 1:
            raise AlignmentError("alignment has no usable sites")
        if codes.max(initial=0) >= N_CATEGORIES:
            raise AlignmentError("codes must be in 0..3 (A, C, G, T)")
        labels = tuple(self.labels)
        if len(labels) != n:
            raise AlignmentError("label count does not match sequence count")
        if len(set(labels)) != n:
            raise AlignmentError("sequence labels must be unique")
        site_index = np.asarray(self.site_index, dtype=np.int64)
        if site_index.shape != (k,):
            raise AlignmentError("site_index length does not match site count")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "site_index", site_index)
        object.__setattr__(self, "masked_sites", tuple(int(p) for p in self.masked_sites))

    @property
    def n(self) -> int:
        return self.codes.shape[0]

    @property
    def num_sites(self) -> int:
        return self.codes.shape[1]

    @property
    def masked_count(self) -> int:
        return len(self.masked_sites)

    def sequence(self, i: int) -> np.ndarray:
        return self.codes[i]

    def subset_sites(self, keep) -> "Alignment":
        """Restrict the view to the given site positions (indices into codes)."""
        keep = np.asarray(keep)
        if keep.dtype == bool:
            keep = np.flatnonzero(keep)
        if keep.size == 0:
            raise AlignmentError("site subset is empty")
        return Alignment(
            labels=self.labels,
            codes=self.codes[:, keep],
            site_index=self.site_index[keep],
            masked_sites=self.masked_sites,
        )


def from_sequences(labels, sequences) -> Alignment:
    """Build an Alignment from raw sequence strings, applying the masking policy.

    Args:
        labels: one name per sequence.
        sequences: equal-length strings; case-insensitive.

    Raises:
        AlignmentError: on ragged rows, fewer than 2 sequences, or when no
            column survives masking.
    """
    labels = [str(lb) for lb in labels]
    sequences = [str(s).strip().upper() for s in sequences]
    if len(sequences) == 0:
        raise AlignmentError("empty input: no sequences found")
    if len(sequences) < 2:
        raise AlignmentError("need at least 2 sequences (no pairs exist)")
    length = len(sequences[0])
    for lb, s in zip(labels, sequences):
        if len(s) != length:
            raise AlignmentError(
                f"ragged alignment: sequence '{lb}' has length {len(s)}, expected {length}"
            )
    if length == 0:
        raise AlignmentError("sequences are empty")

    raw = np.frombuffer("".join(sequences).encode("ascii"), dtype=np.uint8)
    raw = raw.reshape(len(sequences), length)
    codes = np.full(raw.shape, N_CATEGORIES, dtype=np.uint8)
    for base, code in _CODE_OF.items():
        codes[raw == ord(base)] = code

    clean = (codes < N_CATEGORIES).all(axis=0)
    masked = tuple(int(p) + 1 for p in np.flatnonzero(~clean))
    if not clean.any():
        raise AlignmentError("all columns masked: no A/C/G/T-only column remains")
    keep = np.flatnonzero(clean)
    return Alignment(
        labels=tuple(labels),
        codes=codes[:, keep],
        site_index=keep + 1,
        masked_sites=masked,
    )


def parse_fasta(data) -> Alignment:
    """Parse FASTA text (str or bytes) into an Alignment.

    Headers start with '>'; sequence lines may wrap freely. Parsing is
    case-insensitive and the input order of records is preserved.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="replace")
    labels: list = []
    chunks: list = []
    current: list = []
    for lineno, line in enumerate(data.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith(">"):
            label = line[1:].strip()
            if not label:
                raise AlignmentError(f"line {lineno}: empty FASTA header")
            labels.append(label)
            chunks.append(current)
            current = []
        else:
            if not labels:
                raise AlignmentError(f"line {lineno}: sequence data before first '>' header")
            current.append(line)
    chunks.append(current)
    sequences = ["".join(c) for c in chunks[1:]]
    if not labels:
        raise AlignmentError("empty input: no FASTA records")
    return from_sequences(labels, sequences)


def read_fasta(path) -> Alignment:
    """Read and parse a FASTA file."""
    with open(path, "rb") as fh:
        return parse_fasta(fh.read())


def category_counts(aln: Alignment) -> np.ndarray:
    """Per-site category counts, shape (K, 4); row k sums to n."""
    return counts_from_codes(aln.codes)


def counts_from_codes(codes: np.ndarray) -> np.ndarray:
    """Category counts for a raw (n, K) code matrix."""
    n, k = codes.shape
    offsets = np.arange(k, dtype=np.int64) * N_CATEGORIES
    flat = (codes.astype(np.int64) + offsets[None, :]).ravel()
    return np.bincount(flat, minlength=k * N_CATEGORIES).reshape(k, N_CATEGORIES)


def site_pair_diff_count(column) -> int:
    """Number of sequence pairs differing at one site.

    Computed from category counts as (n^2 - sum_c n_c^2) / 2, which equals the
    pair count over all (i, j), i < j, without the quadratic loop.
    """
    column = np.asarray(column)
    counts = np.bincount(column.astype(np.int64), minlength=N_CATEGORIES)
    n = int(column.shape[0])
    return (n * n - int((counts * counts).sum())) // 2


def pair_diff_counts(aln: Alignment) -> np.ndarray:
    """Per-site pairwise difference counts, shape (K,)."""
    counts = category_counts(aln)
    n = aln.n
    return (n * n - (counts * counts).sum(axis=1)) // 2


class SiteClass(str, Enum):
    NON_SEGREGATING = "non_segregating"
    SINGLETON = "singleton"
    OTHER_SEGREGATING = "other_segregating"


@dataclass(frozen=True)
class SiteClassification:
    """Per-site classes plus the segregating and singleton counts.

    A site is a singleton only when exactly two categories are present and
    the minority one occurs exactly once; sites with two or more distinct
    minority codes are classed as other_segregating.
    """

    classes: tuple
    s: int
    s_star: int
    segregating_mask: np.ndarray
    singleton_positions: tuple

    @property
    def non_segregating_mask(self) -> np.ndarray:
        return ~self.segregating_mask

    def class_counts(self) -> dict:
        out = {cls.value: 0 for cls in SiteClass}
        for c in self.classes:
            out[c.value] += 1
        return out


def classify_sites(aln: Alignment) -> SiteClassification:
    """Classify every kept site and count segregating sites and singletons."""
    counts = category_counts(aln)
    n = aln.n
    present = (counts > 0).sum(axis=1)
    top = counts.max(axis=1)
    non_seg = top == n
    singleton = (present == 2) & (n - top == 1)
    classes = []
    for k in range(aln.num_sites):
        if non_seg[k]:
            classes.append(SiteClass.NON_SEGREGATING)
        elif singleton[k]:
            classes.append(SiteClass.SINGLETON)
        else:
            classes.append(SiteClass.OTHER_SEGREGATING)
    seg_mask = ~non_seg
    singleton_positions = tuple(int(p) for p in aln.site_index[singleton])
    return SiteClassification(
        classes=tuple(classes),
        s=int(seg_mask.sum()),
        s_star=int(singleton.sum()),
        segregating_mask=seg_mask,
        singleton_positions=singleton_positions,
    )


def sitewise_frequencies(aln: Alignment, sites=None) -> np.ndarray:
    """Plug-in per-site category frequencies, shape (len(sites), 4).

    Each row is counts/n for one designated site and sums to 1 exactly up to
    rounding. `sites` indexes into the kept columns; None means all sites.
    """
    counts = category_counts(aln)
    if sites is not None:
        sites = _site_indices(aln, sites)
        counts = counts[sites]
    return counts / float(aln.n)


def pooled_frequencies(aln: Alignment, sites) -> np.ndarray:
    """Category frequencies pooled over all cells of the designated columns."""
    sites = _site_indices(aln, sites)
    counts = category_counts(aln)[sites].sum(axis=0)
    return counts / float(counts.sum())


def _site_indices(aln: Alignment, sites) -> np.ndarray:
    sites = np.asarray(sites)
    if sites.dtype == bool:
        sites = np.flatnonzero(sites)
    if sites.size == 0:
        raise AlignmentError("site set is empty")
    if sites.min(initial=0) < 0 or sites.max(initial=0) >= aln.num_sites:
        raise AlignmentError("site index out of range")
    return sites


def site_classification_tsv(aln: Alignment) -> str:
    """Per-site classification table as TSV.

    Columns: site_index (original 1-based), class, per-category counts,
    pair_diff_count.
    """
    cls = classify_sites(aln)
    counts = category_counts(aln)
    diffs = pair_diff_counts(aln)
    header = ["site_index", "class"] + [f"count_{b}" for b in NUCLEOTIDES] + ["pair_diff_count"]
    lines = ["\t".join(header)]
    for k in range(aln.num_sites):
        row = [str(int(aln.site_index[k])), cls.classes[k].value]
        row += [str(int(c)) for c in counts[k]]
        row.append(str(int(diffs[k])))
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"
