"""Multilingual extractive-QA data synthesis, filtering, tuning, and evaluation."""

__version__ = "0.1.0"
