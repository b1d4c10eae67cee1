"""Sequential prisoner's dilemma laboratory.

Submodules: ``numerics`` (hand-rolled networks and optimizers), ``envs``
(Apple-Pear, Fruit Gathering, repeated matrix game), ``gamecore``
(rollouts, value estimates, payoff-matrix checks), ``policies`` (mixtures
and bundles), ``training`` (baseline actor-critic), ``detector``
(cooperation-degree detection), ``online_agent`` (reciprocal adaptation),
``kernels`` (compiled batch rollouts) and ``harness`` (the CLI).
"""

__version__ = "0.1.0"
