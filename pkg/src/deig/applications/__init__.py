"""Experiment suites built on the online tracker."""
