"""Global rigid registration of batch grids against map grids."""
from . import kernels
from .align import (
    AlignmentError,
    NoBatchReturns,
    NoMapCoverage,
    brute_force_align,
    correlation_weights,
    fast_global_align,
    fft_align,
)
from .correlate import (
    brute_force_volume,
    compute_l2_distance,
    correlation_volume,
    efficient_odd_size,
    fft_correlate_translations,
    naive_volume,
    rotate_grid,
    rotate_spectrum,
)
from .search import CONVENTIONS, AlignmentResult, CorrelationVolume, SearchSpec, select_peak

__all__ = [
    "AlignmentError",
    "AlignmentResult",
    "CONVENTIONS",
    "CorrelationVolume",
    "NoBatchReturns",
    "NoMapCoverage",
    "SearchSpec",
    "brute_force_align",
    "brute_force_volume",
    "compute_l2_distance",
    "correlation_volume",
    "correlation_weights",
    "efficient_odd_size",
    "fast_global_align",
    "fft_align",
    "fft_correlate_translations",
    "kernels",
    "naive_volume",
    "rotate_grid",
    "rotate_spectrum",
    "select_peak",
]
