"""Analytical voltage sensitivity for unbalanced radial feeders."""
