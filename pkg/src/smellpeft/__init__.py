"""Java code-smell detection, dataset construction and parameter-efficient
fine-tuning of a small numpy transformer classifier."""

__version__ = "0.1.0"
