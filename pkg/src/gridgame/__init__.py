"""Controlled islanding games on DC power-flow grids."""
