"""Dynamic treatment regime estimation by dynamic weighted regression.

Estimators follow the scikit-learn interface: construct with a list of
stage specifications, call ``fit`` on a dataset, then ``predict`` the
recommended action per stage.
"""

from ._version import __version__
from .diagnostics import CalibrationFit, ValidationReport, regression_calibration, validate_tf_model
from .dwglm import DWGLM, DwglmConfig, fit_dwglm
from .dwols import DTRFit, DWOLS, StageFit, StageSpec, fit_dwols
from .dwsurv import DWSurv, SurvivalStageSpec, fit_dwsurv
from .dwsurv_mt import DWSurvMT, MultiStageSpec, fit_dwsurv_mt
from .exceptions import DTRError, NearDegenerateWeight, NumericalError, ValidationError
from .gdwols import GDWOLS, DoseStageSpec, UniformContinuous, UniformDiscrete, fit_gdwols
from .inference import BootstrapConfig, BootstrapResult, bootstrap_ci, estimate_nonregularity
from .regime import ArgmaxRule, BinaryRule, DoseRule, Regime
from .report import FitReport
from .simgen import GeneratedData, Scenario
from .tabular import Dataset, TermList, build_design, load_csv, write_csv
from .weights import TreatmentWeights

__all__ = [
    "__version__",
    "ArgmaxRule",
    "BinaryRule",
    "BootstrapConfig",
    "BootstrapResult",
    "CalibrationFit",
    "DTRError",
    "DTRFit",
    "DWGLM",
    "DWOLS",
    "DWSurv",
    "DWSurvMT",
    "Dataset",
    "DoseRule",
    "DoseStageSpec",
    "DwglmConfig",
    "FitReport",
    "GDWOLS",
    "GeneratedData",
    "MultiStageSpec",
    "NearDegenerateWeight",
    "NumericalError",
    "Regime",
    "Scenario",
    "StageFit",
    "StageSpec",
    "SurvivalStageSpec",
    "TermList",
    "TreatmentWeights",
    "UniformContinuous",
    "UniformDiscrete",
    "ValidationError",
    "ValidationReport",
    "bootstrap_ci",
    "build_design",
    "estimate_nonregularity",
    "fit_dwglm",
    "fit_dwols",
    "fit_dwsurv",
    "fit_dwsurv_mt",
    "fit_gdwols",
    "load_csv",
    "regression_calibration",
    "validate_tf_model",
    "write_csv",
]
