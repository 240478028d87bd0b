"""Functional simulator and cost model for transverse-read PIM on
domain-wall (racetrack) memory."""

__version__ = "0.1.0"
