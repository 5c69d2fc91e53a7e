"""Active debris removal mission planning with a QUBO formulation."""

__version__ = "0.1.0"
