"""
RiskTrack Package
Risk-sensitive (LEQG) tracking controllers for homogeneous pursuer groups
"""
__version__ = "0.1.0"
__author__ = "RiskTrack Team"
