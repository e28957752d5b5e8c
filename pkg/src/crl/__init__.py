"""Exact causal inference for decision models."""

from .core import Assignment, Distribution, Role, Slice, Variable, merge, normalize
from .kernel import backend

__version__ = "0.1.0"

__all__ = ["Assignment", "Distribution", "Role", "Slice", "Variable", "merge", "normalize", "backend"]
