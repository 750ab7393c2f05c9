"""
fastbench test suite
"""
