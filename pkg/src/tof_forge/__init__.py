"""tof_forge: AMCW time-of-flight imaging workbench.

Simulates four-phase raw sensor frames under configurable exposure and
noise, reconstructs depth with the classical demodulation pipeline, and
trains an encoder-decoder network that maps weak raw frames directly to
depth maps.
"""

__version__ = "0.1.0"
