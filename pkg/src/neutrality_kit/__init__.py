"""Frequency-based selective-neutrality testing for DNA sequence alignments.

The package covers alignment ingestion and site classification, the classical
diversity estimators with Tajima's D as a baseline, exact U-statistic moment
machinery over site-probability models, a jackknife-powered asymptotically
normal neutrality test, and Monte Carlo studies that check the normal
approximation, its convergence rates, and test size/power at desk scale.
"""

__version__ = "0.1.0"

from .alignment import (  # noqa: E402
    Alignment,
    AlignmentError,
    SiteClass,
    classify_sites,
    from_sequences,
    parse_fasta,
    pooled_frequencies,
    read_fasta,
    site_pair_diff_count,
    sitewise_frequencies,
)
from .estimators import (  # noqa: E402
    HarmonicCoefficients,
    T2Mode,
    TajimaResult,
    hamming_fraction,
    harmonic_coefficients,
    nucleotide_diversity,
    singleton_theta,
    tajima_d,
    tajima_d1_variance,
    watterson_theta,
)
from .models import (  # noqa: E402
    IndependentSitesModel,
    MarkovSitesModel,
    ModelSpecError,
    SiteModel,
    model_from_spec,
    model_to_spec,
    stationary_distribution,
)
from .ustats import (  # noqa: E402
    DegenerateKernelError,
    MomentSet,
    berry_esseen_bound,
    berry_esseen_rate,
    conditional_mean_mismatch,
    diversity_variance,
    expected_mismatch,
    h1_fourth_moment,
    h1_projection,
    h2_remainder,
    h2_second_moment,
    mismatch_fraction,
    moment_set,
    sigma1_sq,
)
from .inference import (  # noqa: E402
    AnalysisConfig,
    BootstrapResult,
    FrequencyShift,
    JackknifeEstimate,
    NullSpec,
    Theta0Mode,
    TnResult,
    analyze,
    bootstrap_tajima_pvalue,
    frequency_shift,
    frequency_shift_from_vectors,
    gini_simpson,
    jackknife_diversity_variance,
    neutrality_test,
    normal_pvalue,
    null_expectation,
    report_json,
    report_tsv,
)
from .simulator import (  # noqa: E402
    PitmanDrift,
    PowerStudyResult,
    RateStudyResult,
    SimConfig,
    SimStudyResult,
    clt_study,
    power_study,
    rate_study_k,
    rate_study_n,
    sample_alignment,
)
