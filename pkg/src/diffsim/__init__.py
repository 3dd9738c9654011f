"""Simulation and exact oracles for SIS, SIRS and cSIRS diffusion on graphs."""
