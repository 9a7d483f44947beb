"""Life-course event graphs: causal discovery over life events followed by
per-edge survival analysis of the transition times."""
from ._kernels import BACKEND
from .calendar import GroundTruthSpec, PersonCalendar, generate_synthetic, read_calendars, validate_calendar, write_calendars
from .cox import CoxModel, average_survival, c_index, conditioned_curves, encode, fit_cox, predict_survival
from .elaboration import extract_pair_observations, extract_tte, stratified_split
from .univariate import ecdf_survival, km_fit, na_fit, normalized_hazard, survival_from_cumhazard

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CoxModel",
    "GroundTruthSpec",
    "PersonCalendar",
    "average_survival",
    "c_index",
    "conditioned_curves",
    "ecdf_survival",
    "encode",
    "extract_pair_observations",
    "extract_tte",
    "fit_cox",
    "generate_synthetic",
    "km_fit",
    "na_fit",
    "normalized_hazard",
    "predict_survival",
    "read_calendars",
    "stratified_split",
    "survival_from_cumhazard",
    "validate_calendar",
    "write_calendars",
]
