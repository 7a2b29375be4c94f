"""Very weak solutions of the clamped Euler-Bernoulli beam

    u_tt + (c u_xx)_xx + b u_xx = g  on (0, 1) x (0, T),  u = u_x = 0 at x = 0, 1,

with distributional c, b, g and initial data, computed by mollifier
regularization, Hermite-cubic finite elements and Newmark time stepping.
"""
from .distmodel import (Constant, Dirac, DistributionalExpr, Heaviside, NegLog, Product, Smooth,
                        decompose_positive, expr)
from .femcore import HermiteMesh, QuadratureSpec, assemble, build_space, eval_solution
from .march import TimeGrid, Trajectory, cross_section, newmark_march
from .mollify import Mollifier, MollifierNet, mollify_expr, separable_mollify_2d
from .pipeline import convergence, solve, sweep
from .scenarios import CATALOG, BeamScenario, load_config

__version__ = "0.1.0"
