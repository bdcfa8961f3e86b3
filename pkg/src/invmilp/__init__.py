"""Inverse mixed-integer linear programming: learn threshold constraints,
then objective weights, from observed optimal decisions."""

__version__ = "0.1.0"
