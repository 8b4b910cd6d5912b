"""Campaign performance forecasting: auction-log replay with multi-task
calibration.

The pipeline: a synthetic world emits one day of auction logs; a
factorization-machine response model scores every (request, advertiser)
pair; the replay engine forecasts a campaign's base performance from the
sampled log; a mixture-of-experts calibrator corrects the replay toward
true delivery; the service answers criteria-to-forecast requests over HTTP.
"""

from .errors import (AdforecastError, ConfigError, CriteriaError,
                     DataIntegrityError, DegenerateLabelsError,
                     EncodingError, ParseError, RecordInvariantError,
                     SchemaError, UndefinedMetricError, UnknownIdError)
from .replay.criteria import (BiddingType, CampaignCriteria, Objective,
                              criteria_from_dict, criteria_to_dict,
                              validate_criteria)
from .replay.engine import LogIndex, ReplayResult
from .synthlog.simulator import (StrategyConfig, TruePerformance,
                                 simulate_true_delivery)
from .synthlog.world import World, WorldConfig, gen_world

__version__ = "0.1.0"

__all__ = [
    "AdforecastError", "ConfigError", "CriteriaError", "DataIntegrityError",
    "DegenerateLabelsError", "EncodingError", "ParseError",
    "RecordInvariantError", "SchemaError", "UndefinedMetricError",
    "UnknownIdError",
    "BiddingType", "CampaignCriteria", "Objective", "criteria_from_dict",
    "criteria_to_dict", "validate_criteria",
    "LogIndex", "ReplayResult",
    "StrategyConfig", "TruePerformance", "simulate_true_delivery",
    "World", "WorldConfig", "gen_world",
    "__version__",
]
