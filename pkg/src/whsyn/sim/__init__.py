from .simulate import (InadmissibleSequence, MissGeneratorConfig, generate_mu, lifted_schedule, mu_to_tau_alpha, rng_for,
                       run_until_decay, simulate_lifted, simulate_steps, stack_w)
from .trace import LiftedTrace, Trace

__all__ = [
    "InadmissibleSequence", "MissGeneratorConfig", "generate_mu", "lifted_schedule", "mu_to_tau_alpha", "rng_for",
    "run_until_decay", "simulate_lifted", "simulate_steps", "stack_w", "LiftedTrace", "Trace",
]
