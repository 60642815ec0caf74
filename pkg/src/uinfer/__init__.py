"""Universal (finite-sample valid) likelihood-ratio inference."""

from .data import DataSplit, read_dataset, write_dataset
from .errors import DegenerateStatisticError, InvalidInputError
from .families import (
    FULL,
    FixedPoint,
    Gaussian,
    GaussianUnknownVar,
    MeanAtMost,
    Mixture,
    MixtureComponents,
    MvnIdentity,
    ParamVector,
    UniformScale,
    fit_mle,
    log_likelihood,
    sample_from,
)
from .mixture import em_fit_mixture
from .sequential import ConfSeqTracker, MartingaleState, run_stream
from .sieve import SieveResult, mixture_sieve, select_model
from .split import (
    Crossfit,
    KFold,
    SingleSplit,
    Subsample,
    TestOutcome,
    UniversalSet,
    crossfit_lrt,
    lrt,
    relaxed_split_lrt,
    split_lrt,
    uniform_classical_interval,
    uniform_crossfit_interval,
)

__version__ = "0.1.0"
