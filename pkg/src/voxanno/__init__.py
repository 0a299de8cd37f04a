"""Interactive volumetric annotation with a background-trained
convolutional autoencoder and reader-agreement analytics."""

__version__ = "0.1.0"
