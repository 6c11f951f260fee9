"""Simulation and convergence testing for stochastic delay differential equations."""
