"""Physics-informed neural networks with Reptile meta-learned initializations."""

__version__ = "0.1.0"
