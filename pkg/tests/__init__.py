"""
Test Suite for Intelligent Support Router

Contains unit and integration tests.
"""
