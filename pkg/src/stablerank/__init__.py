"""Stable-matching re-ranking of recommendation lists under item capacities."""
