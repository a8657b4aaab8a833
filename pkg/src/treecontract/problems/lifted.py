"""Unary-lift demo contractors: subtree sums / vertex counting."""

from ..engine import lift_unary


def _add(a, b):
    return a + b


def _val_or_one(tree, v):
    return tree.attrs[v].get("val", 1)


def sum_plugin():
    """Subtree sums; a vertex without a val attribute counts 1."""
    return lift_unary(_add, _add, init=_val_or_one, name="sum")
