"""Lace expansion and convolution-algebra deconvolution for weakly self-avoiding walk on Z^d."""

__version__ = "0.1.0"
