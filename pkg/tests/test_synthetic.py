import threading
import time

import numpy as np
import psutil
import pytest

from fastbench.clock import now, sleep_until
from fastbench.enums import ResourceClass
from fastbench.metrics import CpuSampler, cpu_sampler
from fastbench.synthetic import PayloadPool, synthetic_work


def measured(latency, resource_class, payload=None):
    cpu = time.thread_time()
    elapsed = synthetic_work(latency, resource_class, payload)
    return elapsed, (time.thread_time() - cpu) * 1000.0


def test_zero_latency():
    for rc in ResourceClass:
        assert synthetic_work(0, rc) < 1.0


@pytest.mark.timing
def test_cpu_work():
    elapsed, cpu = measured(50, ResourceClass.CPU)
    assert 50 <= elapsed <= 52.5
    assert cpu >= 0.9 * elapsed


@pytest.mark.timing
def test_idle_work():
    elapsed, cpu = measured(50, ResourceClass.IDLE)
    assert 50 <= elapsed <= 55
    assert cpu <= 0.05 * elapsed + 1.0


@pytest.mark.timing
def test_cpu_work_uses_payload():
    pool = PayloadPool(1 << 20, seed=3)
    elapsed, _ = measured(5, ResourceClass.CPU, pool.payload(8192))
    assert elapsed >= 5


@pytest.mark.slow
@pytest.mark.timing
@pytest.mark.parametrize('resource_class', [ResourceClass.CPU, ResourceClass.IDLE])
def test_calibration(resource_class):
    results = np.array([measured(50, resource_class) for _ in range(1000)])
    elapsed, cpu = results[:, 0], results[:, 1]
    assert elapsed.min() >= 50
    assert np.percentile(elapsed, 99) <= 52.5
    if resource_class == ResourceClass.CPU:
        assert cpu.sum() >= 0.95 * elapsed.sum()
    else:
        assert cpu.sum() <= 0.05 * elapsed.sum()


def test_payload_pool():
    pool = PayloadPool(10000, seed=1)
    view = pool.payload(4096)
    assert len(view) == 4096
    assert bytes(view) == bytes(PayloadPool(10000, seed=1).payload(4096))
    assert pool.payload(10000).nbytes == 10000
    with pytest.raises(ValueError):
        pool.payload(10001)


@pytest.mark.timing
def test_sleep_until():
    deadline = now() + 0.02
    woke = sleep_until(deadline)
    assert deadline <= woke <= deadline + 0.002


@pytest.mark.timing
def test_sampler_count_and_bounds():
    sampler = cpu_sampler(0.1)
    time.sleep(1.05)
    series = sampler.stop()
    assert sampler.available
    assert 9 <= len(series) <= 11
    assert all(0.0 <= u <= 100.0 for _, u in series)
    assert [round(t, 3) for t, _ in series[:3]] == [0.1, 0.2, 0.3]


@pytest.mark.timing
def test_idle_process_is_quiet():
    sampler = cpu_sampler(0.2)
    time.sleep(1.0)
    series = sampler.stop()
    assert max(u for _, u in series) < 10.0


@pytest.mark.timing
def test_single_spinner():
    cores = psutil.cpu_count() or 1
    stop = threading.Event()

    def spin():
        while not stop.is_set():
            synthetic_work(10, ResourceClass.CPU)

    worker = threading.Thread(target=spin)
    worker.start()
    try:
        sampler = CpuSampler(interval=0.5).start()
        time.sleep(2.6)
        series = sampler.stop()
    finally:
        stop.set()
        worker.join()
    mean = sum(u for _, u in series[1:]) / len(series[1:])
    assert mean == pytest.approx(100.0 / cores, abs=3 + 100.0 / cores * 0.1)
