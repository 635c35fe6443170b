"""Logic-locking experiments: netlists, locking schemes, resynthesis and attacks."""
from .netlist import Gate, GateKind, Netlist, parse_bench, read_bench, simulate, write_bench

__version__ = "0.1.0"

__all__ = ["Gate", "GateKind", "Netlist", "parse_bench", "read_bench", "simulate", "write_bench"]
