"""
RiskTrack Simulation Module
Closed-loop stochastic integration and Monte Carlo cost estimation
"""
