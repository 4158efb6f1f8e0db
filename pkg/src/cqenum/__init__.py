"""Enumeration of conjunctive query answers with bounded delay and constant-time
membership tests, built from degree-based instance splitting and free-connex
tree decompositions."""

from .cqparse import CQ, Atom, parse_cq, format_cq, project_query, refine_query
from .relmodel import Signature, Structure, load_structure, dump_structure, build_selection_index
from .consistency import (Refinement, make_refinement, make_consistent,
                          make_strongly_m_consistent)
from .decomp import (TreeDecomposition, validate_td, is_free_connex, enumerate_fc_tds,
                     build_join_tree)
from .splitting import (degrees, is_uniform, split_refinement, split_to_uniform, CostFunction,
                        cost_eval, width_under_g)
from .enumerate import EnumIndex, StepCounter, preprocess_acyclic, enumerate_answers, union_enumerate
from .pipeline import PipelineParams, QueryIndex, preprocess
from .oracle import brute_eval, brute_eval_refined
from . import errors

__version__ = "0.1.0"
