"""Arbitrage detection, growth-optimal fractions and tilted deflators for jump-diffusion models."""

__version__ = "0.1.0"

from .characteristics import PartitionCase, SupportInterval, Triplet, bounds, classify, validate
from .deflator import DeflatorSpec, build_deflator, deflator_along_path, deflator_terminal
from .errors import (ArbitrageDetected, ConfigError, DivergentIntegral, ElmdError, InfiniteActivity,
                     InsufficientMass, InvalidConfig, InvalidMeasure, InvalidParam, InvalidPath,
                     NonpositiveWealth, NotApplicable, NotSpecial, QuadratureFailure, BracketFailure)
from .growth import (GrowthCurve, OptimalFraction, curve, endpoint_derivative, growth,
                     growth_derivative, optimal_fraction, rel_rate)
from .jump_measure import JumpMeasure
from .simulate import SimConfig, density_path, make_path, simulate_paths, stoch_exp
from .tilt import (TiltField, TiltedMeasure, build_tilt, compose, tilted_triplet, validate_tilt,
                   y1, y2, y3, y4)
from .verify import (TestReport, arbitrage_demo, girsanov_consistency_test, martingale_test,
                     run_suite, supermartingale_test, tv_bound_test)
from .viability import Status, ViabilityVerdict, check_lambda

__all__ = [n for n in dir() if not n.startswith("_")]
