"""Multi-task federated learning over railway edge networks."""
from .coalition import Coalition, CoalitionResult, coalition_form, is_switch_stable, partition_score
from .commitments import (CommitmentParams, commit, generate_params, sign_model, verify,
                          verify_update)
from .matching import MatchingState, blocking_pairs, match_stable, per_user_bandwidth, write_matching_csv
from .model import (Allocation, FlTask, FlUser, RoundDelay, bandwidth_allocate, round_delay,
                    round_energy, task_benefit, user_benefit)

__all__ = [
    "Allocation", "Coalition", "CoalitionResult", "CommitmentParams", "FlTask", "FlUser",
    "MatchingState", "RoundDelay", "bandwidth_allocate", "blocking_pairs", "coalition_form",
    "commit", "generate_params", "is_switch_stable", "match_stable", "partition_score",
    "per_user_bandwidth", "round_delay", "round_energy", "sign_model", "task_benefit",
    "user_benefit", "verify", "verify_update", "write_matching_csv",
]
