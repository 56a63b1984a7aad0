"""Gaze-fixation-driven prompts for promptable segmentation, plus the
matching evaluation harness."""

__version__ = "0.1.0"
