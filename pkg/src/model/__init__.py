"""
RiskTrack Model Module
System matrices and Kronecker-structured group assembly
"""
from src.model.kron import StructuredMatrix, StructuredSpectrum, kron, struct_eigs
from src.model.system import MultiAgentSystem, SystemSpec, assemble, basic_example

__all__ = ["StructuredMatrix", "StructuredSpectrum", "kron", "struct_eigs",
           "MultiAgentSystem", "SystemSpec", "assemble", "basic_example"]
