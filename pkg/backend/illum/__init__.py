"""
ILLUM - compiler toolchain and execution environment for UTXO smart contracts
"""

__version__ = "1.0.0"
