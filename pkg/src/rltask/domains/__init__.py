"""Benchmark environments."""
from .chain import make_chain
from .counterexample import make_counterexample
from .taxi import TaxiSpec, make_taxi
from .terminations import TerminationPattern, apply_random_termination
