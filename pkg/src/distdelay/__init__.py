"""Optimal control of nonlinear systems with distributed, flow-dependent delays.

Subpackages:
    kernels       pipe-flow delay kernels and their discretization
    msr           molten salt reactor model with loop recirculation delays
    delay_approx  delay linearization and characteristic-function analysis
    transcription full discretization of the optimal control problem
    nlp           interior-point solver for the transcribed program
    simulate      high-fidelity DDE simulation and error metrics
    config, cli   JSON scenario configuration and command-line front end
"""

from . import delay_approx, kernels, msr, nlp, simulate, transcription

__all__ = ["delay_approx", "kernels", "msr", "nlp", "simulate", "transcription"]
__version__ = "0.1.0"
