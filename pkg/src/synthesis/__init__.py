"""
RiskTrack Synthesis Module
Dense LEQG controller synthesis and Kronecker closed forms
"""
