"""Pure-Python backend: the kernels run as-is, no compilation."""

from ._kernels import fuzz_campaign, rng_next, rng_seed_state, run_cov, run_trace

NAME = "pure"

__all__ = ["fuzz_campaign", "rng_next", "rng_seed_state", "run_cov", "run_trace", "NAME"]
