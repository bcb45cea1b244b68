"""Two-scale finite element simulation of nonlinear thermo-electric
coupling in periodic composite structures."""

__version__ = "0.1.0"
