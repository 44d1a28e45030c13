"""Solver for the facility group-formation (IXP) coordination game."""

from .model import (Instance, InvalidInstance, SizeCapExceeded, State, is_alpha_stable,
                    is_stable, is_stable_literal, next_best_response, potential, q_value,
                    q_values, rc, social_cost, tc)
from .dynamics import best_response, stabilize, stabilize_alpha
from .payments import (direct_payment_scheme, doubled_weights, minimal_payment,
                       peering_payments, tradeoff_check, witness_states)
from .oracle import (OracleTooLarge, brute_force_optimum, enumerate_stabilizable,
                     price_of_anarchy, price_of_stability)

__version__ = "0.1.0"

__all__ = [
    "Instance", "InvalidInstance", "SizeCapExceeded", "State", "is_alpha_stable", "is_stable",
    "is_stable_literal", "next_best_response", "potential", "q_value", "q_values", "rc",
    "social_cost", "tc", "best_response", "stabilize", "stabilize_alpha",
    "direct_payment_scheme", "doubled_weights", "minimal_payment", "peering_payments", "tradeoff_check",
    "witness_states", "OracleTooLarge", "brute_force_optimum", "enumerate_stabilizable",
    "price_of_anarchy", "price_of_stability",
]
