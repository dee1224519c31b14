"""Semiparametric estimation of bundle choice models."""

from .data import CrossSectionDataset, PanelDataset, ParamVector, OUTCOMES, read_csv, write_csv
from .designs import DesignSpec, simulate_design, true_choice_probability
from .exceptions import (
    BatchError, BundleChoiceError, ConfigurationError, DegenerateInputError, EstimationError,
    InputError, OptimizationError, TieError, TrainingError,
)
from .firststage import MLPProbability, NadarayaWatsonProbability
from .harness import (ReplicationPlan, coverage, emit_table, run_replications, summarize,
                      summarize_output)
from .kernels import BandwidthSpec, KernelSpec
from .lad import LADEstimator, PanelLADEstimator, bootstrap_lad, estimate_lad
from .mrc import MRCEstimator, bootstrap_mrc, estimate_mrc, eta_test_cross, eta_test_cross_fit
from .optimizer import DEConfig, de_minimize
from .panel_ms import (NumericalBootstrapSpec, PanelMSEstimator, estimate_panel_ms,
                       eta_test_panel, eta_test_panel_cross_fit, numerical_bootstrap)
from .results import EstimationResult, EtaTestResult

__version__ = "0.1.0"
