"""Attack-tree analysis by translation to stochastic timed automata and statistical model checking."""
from .engine import (Estimate, SmcQuery, SmcSettings, Verdict, check_threshold, estimate,
                     estimate_many, parse_query, required_runs, simulate_trace)
from .model import (AttackTree, GateKind, Node, ScenarioSpec, apply_scenario, enumerate_scenarios,
                    leaf_cdf, validate_tree)
from .oracle import node_cdf, top_curve
from .parser import ModelParseError, parse_model, parse_scenarios, serialize_model
from .principles import (TransformSpec, apply_diversity, apply_hardening, apply_least_privilege,
                         apply_plan)
from .shipped import shipped_models
from .translate import translate_tree

__version__ = "0.1.0"
