"""Selective quantum state tomography toolkit.

Estimate individual density-matrix elements (and bounded-operator mean
values) of a d-dimensional quantum state from one fixed measurement record,
using a POVM built from d+1 mutually unbiased bases, then assemble and
project full-state estimates under the max norm.
"""

__version__ = "0.1.0"
