"""Serial turbo autoencoder laboratory.

Component-wise training with artificial Gaussian priors, EXIT chart
analysis and fitting, gradual-clipping 1-bit quantization of the component
interface, length retargeting of trained components, encoder distillation,
and Monte-Carlo BER/BLER evaluation over an AWGN channel.
"""

__version__ = "0.1.0"
