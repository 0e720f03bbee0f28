"""Explain intrusion-detection misclassifications with minimal adversarial corrections."""

__version__ = "0.1.0"
