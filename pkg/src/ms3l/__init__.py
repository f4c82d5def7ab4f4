"""Multi-sensory semi-supervised imitation learning on a 2D indoor simulator."""

__version__ = "0.1.0"
