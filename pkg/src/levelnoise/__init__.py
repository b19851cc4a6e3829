"""Level-spacing noise diagnostics for quantum chaotic spectra.

Tight-binding spectra (3D Anderson, 1D Harper) and Riemann zeta zeros are
unfolded to unit mean spacing and analysed through the level signal, its
power spectrum, fractal dimension, spacing distribution and the
distribution of spacing increments.
"""

__version__ = "0.1.0"

from .errors import (
    DataIntegrityError,
    DomainError,
    FitDomainError,
    IncompleteWindowError,
    InsufficientDataError,
    PlanMismatchError,
    SizeError,
    SolverError,
)
from .models import (
    AndersonParams,
    HarperParams,
    SparseSymmetricMatrix,
    build_anderson,
    build_harper,
    sample_reference_spacings,
)
from .eigensolver import Spectrum, eigs_dense, eigs_window, inertia
from .unfolding import (
    IDOS,
    SpacingSeries,
    UnfoldedSpectrum,
    estimate_idos,
    spacings,
    unfold,
)
from .series_stats import (
    average_power_spectra,
    box_counting_dimension,
    dimension_from_alpha,
    distribution_distance,
    fit_gaussian,
    fit_power_law,
    histogram,
    increment_series,
    level_signal,
    power_spectrum,
    reference_distribution,
)
from .riemann import ZeroTable, load_zeros, unfold_zeros
from .ensemble import ExperimentPlan, ExperimentReport, merge_reports, run_experiment
