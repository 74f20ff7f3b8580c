"""Orthogonal GANs at desk scale.

The discriminator is an encoder E whose code average is the critic score; a
Pearson-correlation term between z and E(G(z)) turns E into a usable encoder.
"""

__version__ = "0.1.0"
