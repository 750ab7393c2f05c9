#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""Build script for fastbench, the metadata lives in setup.cfg"""

from setuptools import setup

if __name__ == "__main__":
    setup(use_scm_version={"local_scheme": "no-local-version"})
