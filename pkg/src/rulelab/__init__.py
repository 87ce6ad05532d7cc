"""Rule-valid synthetic tasks, analytic and toy trainable denoisers, and the
measurement pipeline for the two training clocks: rule learning and
memorization."""

__version__ = "0.1.0"
