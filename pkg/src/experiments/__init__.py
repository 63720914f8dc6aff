"""
RiskTrack Experiments Module
Command implementations and result writers behind the CLI
"""
