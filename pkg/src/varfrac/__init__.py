"""Variable-domain nonlocal operators at desk scale.

Assembles discrete operators h(x)u(x) + L u with x-dependent integration
sets, solves the elliptic Dirichlet problem, computes the principal
eigenvalue by constructive iteration, time-steps the parabolic problem,
and checks the qualitative theory (comparison, barriers, positivity,
long-time decay) numerically.
"""

__version__ = "0.1.0"
