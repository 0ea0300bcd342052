"""Intruder deduction modulo AC-convergent theories with blind signatures."""

from .terms import (Term, ParseError, name, var, pub, sign, blind, pair, enc,
                    eapp, parse_term, format_term, subterms, variables, size,
                    substitute, equal_mod_ac, e_factors, saturate, TermIndex)
from .rewriting import (Theory, RewriteRule, NormalizationBudgetExceeded,
                        empty_theory, ac_theory, xor_theory, ag_theory,
                        make_theories, normalize, is_normal, match_mod_ac,
                        one_step_rewrites, Abstraction, abstract)
from .elementary import ElemWitness, elem_deduce, replay
from .engine import OracleBoundExceeded, applicable, deduce, deducible, nd_closure_oracle, right_deduce
from .proofs import (Derivation, Sequent, check, find_error, weaken,
                     is_normal_derivation, linear_to_seq, nd_to_seq, seq_to_nd,
                     to_json, from_json, dumps, loads, render_text)
from .constraints import (Constraint, ConstraintSystem, Substitution, Solution,
                          proper, right, system, mgu, well_formed, step,
                          successors, solve, extract_solution, verify_solution,
                          constraint_measure, system_measure, measure_less,
                          shared_names, effective_public, parse_constraint_file)

__version__ = "0.1.0"
