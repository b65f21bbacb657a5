"""Benchmark kernels, environments, learners and experiment drivers."""
