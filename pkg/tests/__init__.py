"""
Test suite for SMALLDET.

This package contains unit tests for all modules in the smalldet package.
"""
