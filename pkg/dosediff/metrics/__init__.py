"""
Dosimetric evaluation: D_m order statistics, homogeneity index, DVH,
paired t-tests, high frequency energy, and the per-case reports built
from them.
"""

from .dose import (DoseSummary, DvhCurve, dose_at_volume, dvh,
                   homogeneity_index, summary_metrics)
from .stats import TTestResult, paired_t_test, t_two_tailed_p
from .spectral import gaussian_blur, hf_energy_ratio, high_frequency_mask
from .report import (CASE_COLUMNS, DoseReport, METRIC_NAMES,
                     compare_reports, dump_aggregate, dump_report,
                     evaluate, evaluate_case, format_mean_std, load_report)
