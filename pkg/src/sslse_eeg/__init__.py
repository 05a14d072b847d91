"""EEG-to-image contrastive learning pipeline with an SE-residual encoder.

Submodules import numpy and matplotlib; this top level stays import-light so
the command line can apply its thread cap before numerical libraries load.
"""

__version__ = "0.1.0"
