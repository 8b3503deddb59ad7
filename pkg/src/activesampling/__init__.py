"""Active sampling of relevance judgments with Horvitz-Thompson estimation."""

__version__ = "0.1.0"
