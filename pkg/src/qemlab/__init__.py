"""Quasi-ergodic measures of noisy expanding maps with holes.

Ulam discretizations of annealed transfer operators, their leading
eigendata, region decomposition, Monte Carlo cross-checks and
thermodynamic-formalism oracles.
"""

from .dynamics import (CIRCLE, INTERVAL, CellPartition, Hole, MapSystem, StateSpace,
                       WeightFunction, build_map, constant_weight, geometric_weight,
                       survivor_cells, tabulated_weight)
from .noise import ABSORBED, NoiseKernel, sample_step, sample_steps, transition_density
from .operator import (DualOperator, UlamOperator, active_cells, apply, assemble, dual,
                       dump_operator, load_operator)
from .oracle import (GOLDEN_LOG, EquilibriumState, MarkovModel, dense_perron,
                     exact_conditioned_average, interval_markov_model,
                     logistic_repeller_model, pressure)
from .regions import NoRecurrentClass, RegionGraph, build_regions, restrict
from .simulate import (ConditionedEstimate, Extinction, run_conditioned, survival_curve,
                       survival_rate)
from .spectral import (ConvergenceError, QuasiErgodicMeasure, SpectralTriple, detect_period,
                       power_leading, quasi_ergodic, solve_triple)

__version__ = "0.1.0"
