"""Python access to the chronos integrators and benchmark experiments."""

import csv
import io

from ._core import (
    ChronosError,
    erk_evolve,
    erk_fixed,
    fixed_point_solve,
    select_stage_count,
    splitting_names,
    splitting_order,
    table_names,
    table_order,
)
from . import _core

ChronosError.code = property(lambda self: self.args[1] if len(self.args) > 1 else None)


def _columns(text):
    """CSV text to a dict of columns; numeric cells become float."""
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    cols = {name: [] for name in header}
    for row in body:
        for name, cell in zip(header, row):
            try:
                value = float(cell)
            except ValueError:
                value = cell
            cols[name].append(value)
    return cols


def gray_scott_splitting(**kwargs):
    return _columns(_core.gray_scott_splitting(**kwargs))


def gray_scott_lsrk(**kwargs):
    return _columns(_core.gray_scott_lsrk(**kwargs))


def lotka_volterra(**kwargs):
    return _columns(_core.lotka_volterra(**kwargs))


def sprk_demo(**kwargs):
    return _columns(_core.sprk_demo(**kwargs))


def aa_demo(**kwargs):
    return _columns(_core.aa_demo(**kwargs))


__all__ = [
    "ChronosError",
    "aa_demo",
    "erk_evolve",
    "erk_fixed",
    "fixed_point_solve",
    "gray_scott_lsrk",
    "gray_scott_splitting",
    "lotka_volterra",
    "select_stage_count",
    "splitting_names",
    "splitting_order",
    "sprk_demo",
    "table_names",
    "table_order",
]
