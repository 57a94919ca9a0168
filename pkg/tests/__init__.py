"""Test suite for the agesync package."""
