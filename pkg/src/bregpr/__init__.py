"""Phase retrieval from STFT magnitudes with Bregman divergences."""

__version__ = "0.1.0"
