"""Multisinusoid frequency estimation.

Signal synthesis, classical spectral estimators (periodogram, MUSIC, and
eigenvalue-based order rules), learned frequency representations with a
counting head, and the evaluation metrics that compare them.
"""

from ._core import (
    CounterModel,
    CovarianceEstimate,
    Dataset,
    DistanceMode,
    FreqRepresentation,
    FrModel,
    GeneratorConfig,
    Grid,
    IntegrityError,
    PeakList,
    SampleRecord,
    SinusoidMixture,
    __version__,
    aic_order,
    build_covariance,
    chamfer,
    counting_error,
    detection_radius,
    dirichlet_kernel,
    dtft,
    fnr,
    generate_record,
    generate_records,
    ground_truth_fr,
    load_counter_model,
    load_dataset,
    load_fr_model,
    mdl_order,
    missed_count,
    music,
    music_pseudospectrum,
    periodogram,
    pick_peaks,
    snr_db,
    sorte_order,
    synthesize,
    wrap_distance,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
