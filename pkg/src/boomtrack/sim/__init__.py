"""Kinematic lab-boom simulator used as ground truth."""
