"""Character-level CNN with Squeeze-and-Excitation blocks for dialect/topic tasks."""

__version__ = "0.1.0"
