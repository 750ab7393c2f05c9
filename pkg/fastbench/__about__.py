"""
__about__.py
"""

# -*- coding: utf-8 -*-
#
__project__ = "fastbench"
__description__ = "Fast-data stream processing benchmark harness"
__author__ = "FastBench Authors"
__url__ = "https://github.com/fastbench/fastbench"
__license__ = "License :: OSI Approved :: MIT License"
__version__ = "0.1.0"
__status__ = "Development Status :: 4 - Beta"
