"""
RiskTrack Solvers Module
Generalized algebraic Riccati equations and model checks
"""
