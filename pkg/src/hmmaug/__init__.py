"""HMM-based data augmentation frontend for conversational TTS corpora."""

__version__ = "0.1.0"
