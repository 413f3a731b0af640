"""Numerical laboratory for the 2D filtered-Euler equations."""
import os

# numba falls back through layers at first parallel launch and warns when the
# system TBB is too old; OpenMP is always shipped with the wheels
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

__version__ = "0.1.0"
