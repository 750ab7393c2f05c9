# -----------------------------------------------------------------------------
# Summary:		Monotonic clock and hybrid sleep
# Copyright (c) FastBench Authors. All Rights Reserved.
# -----------------------------------------------------------------------------
#

import time

# final stretch before a deadline is spun rather than slept
SPIN_WINDOW = 0.0015

now = time.perf_counter


def sleep_until(deadline: float, spin: float = SPIN_WINDOW) -> float:
    """Blocks until ``now() >= deadline``

    Sleeps coarsely until ``spin`` seconds before the deadline, then spins.

    Args:
        deadline (float): target time on the :func:`now` clock
        spin (float, optional): spin window in seconds. Defaults to SPIN_WINDOW.

    Returns:
        float: the time at which the wait ended
    """
    remaining = deadline - now()
    if remaining > spin:
        time.sleep(remaining - spin)
    t = now()
    while t < deadline:
        t = now()
    return t
