"""Spatio-temporal multi-task multi-view regression."""
