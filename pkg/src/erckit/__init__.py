"""Emotion-recognition-in-conversation toolkit: corpus tooling and the MDI model."""

__version__ = "0.1.0"
