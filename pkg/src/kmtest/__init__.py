"""Two-sample tests for right-censored data based on Kaplan-Meier weighted
energy distance and kernel maximum mean discrepancy, calibrated by permutation."""

__version__ = "0.1.0"

from .bandwidth import BandwidthRule, median_heuristic
from .data import (
    CensoredObservation,
    CensoredSample,
    DataError,
    TwoSampleData,
    mark_last_uncensored,
    order_sample,
    read_csv,
    truncate,
    write_csv,
)
from .kernels import KernelSpec, eval_distance, eval_distance_induced_kernel, eval_kernel, gram
from .permutation import PermutationPlan, TestResult, enumerate_assignments, permutation_test
from .statistics import (
    StatisticSpec,
    StatisticValue,
    compute_statistic,
    compute_statistic_multivariate,
    cross_term,
    statistic,
    within_term,
)
from .weights import WeightedSample, km_weights, normalize_weights
