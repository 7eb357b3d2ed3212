"""Local subsystems of a quenched chaotic Ising chain as quantum stopwatches."""

__version__ = "0.1.0"
