"""Constraint satisfaction for reducts of unary structures via finite type structures."""
from .algebra import FiniteAlgebra, check_mashup_lemma, clone_closure, has_trivial_two_quotient
from .finite_csp import ResourceLimitExceeded, SolverConfig, SolverInstance, solve
from .formula import parse_formula
from .polymorphism import FiniteStructure, IdentitySpec, classify_reduct, has_polymorphism
from .reduction import CspInstance, decide, lift_solution, reduce, verify_witness
from .type_structure import ReductSpec, RelationSymbol, TypeStructure, build, choose_m
from .unary_base import Block, PartitionSpec, enumerate_types, expand_with_constants, stabilise

__version__ = "0.1.0"
