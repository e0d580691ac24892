"""evacsim: preemptive typhoon evacuation decisions, simulated and analyzed.

Subpackages map to the pipeline stages: geo (spatial world), population
(coded households), risk (perceived-risk math), engine (tick simulation),
sweep (batch experiments), stats (OLS sensitivity), cli (command surface).
"""

__version__ = "0.1.0"
