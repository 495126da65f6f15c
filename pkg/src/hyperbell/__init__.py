"""Simulation and analysis of Bell and steering tests on polarization x time-bin photon pairs."""

__version__ = "0.1.0"
