import pytest

from fastbench import workloads


@pytest.fixture(scope='module')
def auth():
    return workloads.builtin('authentication')


@pytest.fixture(scope='module')
def enrollment():
    return workloads.builtin('enrollment')
