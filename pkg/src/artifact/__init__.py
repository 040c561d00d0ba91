"""SU(2) quasicharacter calculus: exact recoupling, tree bases, trace polynomials, lattice Hamiltonians."""

from __future__ import annotations

__version__ = "0.1.0"
