"""Numba backend: the shared kernels compiled with @njit.

``fuzz_campaign`` calls ``run_cov`` and the RNG helpers through module
globals, so it is re-bound over a globals copy where those names point at
the compiled dispatchers before being jitted itself.
"""

import types

from numba import njit

from . import _kernels

NAME = "numba"


def _rebind(fn, **bindings):
    globs = dict(fn.__globals__)
    globs.update(bindings)
    clone = types.FunctionType(fn.__code__, globs, fn.__name__, fn.__defaults__, fn.__closure__)
    clone.__doc__ = fn.__doc__
    return clone


rng_seed_state = njit(cache=True)(_kernels.rng_seed_state)
rng_next = njit(cache=True)(_kernels.rng_next)
run_trace = njit(cache=True)(_kernels.run_trace)
run_cov = njit(cache=True)(_kernels.run_cov)
fuzz_campaign = njit(cache=True)(
    _rebind(
        _kernels.fuzz_campaign,
        run_cov=run_cov,
        rng_next=rng_next,
        rng_seed_state=rng_seed_state,
    )
)

__all__ = ["fuzz_campaign", "rng_next", "rng_seed_state", "run_cov", "run_trace", "NAME"]
