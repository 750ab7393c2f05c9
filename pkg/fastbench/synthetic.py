# -----------------------------------------------------------------------------
# Summary:		Synthetic task work and lazily materialised payloads
# Copyright (c) FastBench Authors. All Rights Reserved.
# -----------------------------------------------------------------------------
"""Synthetic work stands in for real task logic. CPU-class work transforms a
block of bytes in memory until the configured latency has elapsed; idle-class
work waits without consuming CPU.
"""

import hashlib

import numpy as np

from fastbench.clock import now, sleep_until
from fastbench.enums import ResourceClass

WORK_BLOCK_SIZE = 4096

_DEFAULT_BLOCK = bytes(np.random.default_rng(0).integers(0, 256, WORK_BLOCK_SIZE, dtype=np.uint8))


def synthetic_work(latency: float, resource_class: ResourceClass = ResourceClass.CPU, payload=None) -> float:
    """Consumes ``latency`` milliseconds of wall-clock time

    Args:
        latency (float): duration in milliseconds, >= 0
        resource_class (ResourceClass, optional): CPU busy work or idle wait. Defaults to CPU.
        payload (bytes-like, optional): event payload, its first 4 KiB seed the work block

    Returns:
        float: elapsed milliseconds
    """
    start = now()
    if latency <= 0:
        return (now() - start) * 1000.0
    deadline = start + latency / 1000.0
    if resource_class == ResourceClass.IDLE:
        sleep_until(deadline)
    else:
        block = _DEFAULT_BLOCK
        if payload is not None and len(payload) >= WORK_BLOCK_SIZE:
            block = payload[:WORK_BLOCK_SIZE]
        # hashing releases the GIL for blocks over 2 KiB so worker threads run in parallel
        while now() < deadline:
            block = hashlib.sha256(block).digest() * (WORK_BLOCK_SIZE // 32)
    return (now() - start) * 1000.0


class PayloadPool:
    """Seeded pseudo-random bytes handed out as zero-copy slices

    Args:
        max_size (int): largest payload that will be requested
        seed (int, optional): random seed. Defaults to 0.
    """
    def __init__(self, max_size: int, seed: int = 0):
        size = max(int(max_size), WORK_BLOCK_SIZE)
        self._buffer = np.random.default_rng(seed).integers(0, 256, size, dtype=np.uint8).tobytes()
        self._view = memoryview(self._buffer)

    @property
    def max_size(self) -> int:
        return len(self._buffer)

    def payload(self, size: int) -> memoryview:
        if size > len(self._buffer):
            raise ValueError('payload of {0} bytes exceeds pool size {1}'.format(size, len(self._buffer)))
        return self._view[:size]
