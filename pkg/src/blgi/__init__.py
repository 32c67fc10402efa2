"""Sequential weak-plus-projective measurement correlator simulator.

Quantum side: an entangled qubit pair is weakly measured on both arms,
then projectively read out, and the four signals of every shot are folded
into one CHSH-form correlator whose ensemble mean is estimated by Monte
Carlo, by deterministic integration, and by a closed form.  Classical
side: a local hidden-variable engine samples calibrated-noisy-detector
strategies and establishes the bound |<C>| <= 2 that the quantum weak
regime violates.
"""

__version__ = "0.1.0"

from .lhv import (
    CalibrationReport,
    LHVStrategy,
    brute_force_max,
    brute_force_min,
    calibration_check,
    lhv_mean,
    lhv_records,
    lhv_shot,
    random_strategy,
)
from .measurement import (
    AncillaMeterSpec,
    GaussianMeterSpec,
    MeterOutcome,
    ProjectiveMeterSpec,
    ancilla_kraus,
    apply_dephasing,
    dephasing_factor,
    gaussian_kraus,
    projective_sample,
    sample_ancilla,
    sample_gaussian,
)
from .protocol import (
    DEFAULT_ANGLES,
    Estimate,
    ExperimentConfig,
    MeasurementRecord,
    NumericalError,
    SweepPoint,
    analytic_mean,
    config_analytic_mean,
    correlator,
    exact_mean,
    monte_carlo,
    run_shot,
    sweep,
    violation_threshold,
)
from .qmath import (
    AnalyzerBasis,
    TwoQubitState,
    ZeroProbabilityError,
    analyzer_basis,
    apply_operator,
    bell_state,
    embed,
    expectation,
)
