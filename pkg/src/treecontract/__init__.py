"""Round-accurate simulator for adaptive massively parallel tree contraction."""

from .errors import ExprArithmeticError, InputError, LogIntegrityError, SimFault
from .trees import Tree, parse_tree, serialize_tree

__all__ = [
    "ExprArithmeticError",
    "InputError",
    "LogIntegrityError",
    "SimFault",
    "Tree",
    "parse_tree",
    "serialize_tree",
]

__version__ = "0.1.0"
