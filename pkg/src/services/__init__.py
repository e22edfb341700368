"""Simulation services: perception, belief filter, environment, policies, harness."""
