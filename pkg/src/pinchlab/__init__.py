"""pinchlab: spectra, periods, and curvature of degenerating Riemann surfaces."""

__version__ = "0.1.0"
