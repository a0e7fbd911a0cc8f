"""Dataset-shift toolkit: scenarios, weighted learners, importance weights and evaluation."""

from .constants import APP_VERSION

__version__ = APP_VERSION
