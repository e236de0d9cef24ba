"""heatsing: numerical laboratory for the removability of the fundamental
singularity of the heat equation.

Subsystems: kernel (fundamental solution, poles, Appell transform), profiles
(iterated-log boundary families), dsl (profile expressions), classify
(the integral test on dyadic shells), pde (truncated Dirichlet problems and
the h-parabolic measure), bridge (conditioned-process Monte Carlo), barrier
(the proof's barrier quadratures), cli (command-line entry point).
"""

__version__ = "0.1.0"
