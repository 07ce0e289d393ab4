"""Spectral financial-crisis indicators and systematic trading backtests.

Pipeline: load or generate a daily panel of equity-index components,
extract rolling-window eigenvalue spectra via SVD, turn them into 29
daily indicators, calibrate danger zones against forward maximum
drawdown, run the rule-based active strategy, and benchmark it against
passive and random baselines.
"""

__version__ = "0.1.0"
