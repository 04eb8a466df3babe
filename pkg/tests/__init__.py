"""
Tests for the sparse sensing simulator.
"""
