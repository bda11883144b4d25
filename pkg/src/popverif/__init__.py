"""Verification toolkit for population protocols.

Decides LTL and monadic HyperLTL properties over transitions, under
strong fairness, for population protocols and their immediate-observation
subclass: an explicit product-system engine for fixed population sizes,
a transfer-flow abstraction for unbounded-population reachability, and
cutoff-based protocol-level decision procedures, each paired with an
independent brute-force oracle.
"""

from .errors import (
    FormulaError,
    FormulaSyntaxError,
    ModeGateError,
    NotEnabledError,
    PopverifError,
    ProtocolError,
    ProtocolSyntaxError,
    ResourceLimitError,
)
from .model import (
    MIN_AGENTS,
    Configuration,
    Protocol,
    StateId,
    Transition,
    accelerated_successors,
    complete_totality,
    enabled,
    enumerate_configs,
    parse_protocol,
    reach_set,
    step,
)
from .ltl import (
    HyperFormula,
    LassoWord,
    contains_next,
    dualize_hyper,
    eval_on_lasso,
    negate,
    parse_hyper,
    parse_ltl,
    wellspec_formula,
)
from .rabin import (
    DeterministicRabinAutomaton,
    Nba,
    dra_accepts_lasso,
    ltl_to_dra,
    ltl_to_nba,
    nba_to_dra,
    parse_dra,
    serialize_dra,
)
from .product import (
    ConfigGraph,
    ProdConfig,
    ProductSystem,
    build_graph,
    full_slice_graph,
    make_product_system,
    post_star,
    pre_star,
    sat_exists,
    sat_forall,
    scc_winning,
    winning_set_cwin,
)
from .flows import (
    SHARP,
    TransferFlow,
    antichain_min,
    empirical_blindness,
    flow_step_feasible,
    min_tr_of_transition,
    reachable_via_flows,
    saturate,
    tf_leq,
    tf_product_member_bruteforce,
    tf_product_min,
)
from .hyper import (
    Verdict,
    achievable_valuations,
    achievable_valuations_oracle,
    check_config,
    check_protocol,
    check_protocol_ltl,
    theoretical_bounds,
)
from .sim import estimate_probability, fairness_demo, sample_run

__all__ = [name for name in dir() if not name.startswith("_")]
