"""Planar simulation of a quadrotor with elastic horns bumping into a wall."""
