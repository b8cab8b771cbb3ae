"""First-return times of random walks on sparse networks.

Exact taboo iteration, mean-field and message-passing approximations
(tree and r-neighbourhood), population dynamics for degree-law ensembles,
and tail-slope fitting.
"""
from .approx import (
    MessageMap,
    closed_form_regular,
    combined_F,
    mean_field_F,
    mean_field_report,
    regular_tail_mean,
    tail_mean,
    tree_F,
    tree_message_fixed_point,
)
from .cycle import (
    CycleModel,
    Neighbourhood,
    cycle_F,
    cycle_message_fixed_point,
    extract_neighborhood,
    final_F,
)
from .errors import (
    ConvergenceError,
    GraphFormatError,
    NumericalError,
    ReturnTimeError,
    SingularNeighbourhoodError,
    SingularSystemError,
    ValidationError,
)
from .estimators import (
    CycleReturnTime,
    ExactReturnTime,
    MeanFieldReturnTime,
    PopulationDynamics,
    TreeReturnTime,
)
from .exact import (
    ReturnDistribution,
    f_from_r,
    first_return_exact,
    first_return_exact_many,
    kac_mean,
    return_prob_exact,
    truncated_mean,
)
from .graph import (
    DegreeLaw,
    Graph,
    gen_gnm,
    gen_random_regular,
    gen_regular_sbm,
    load_edge_list,
    read_edge_list,
    stationary_distribution,
    validate,
    write_edge_list,
)
from .popdyn import Population, popdyn_solve, predict_tail_slopes
from .report import ReturnReport, TailMean
from .series import DualPair, PowerSeries, ps_linear_solve
from .tailfit import TailFit, fit_tail_slope, slope_from_h

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
