"""
CEST Z-spectrum quantification: preprocessing and metrics, three steady-state
models, bound-constrained solvers, a self-supervised network, synthetic
phantoms and evaluation.
"""
from .errors import CestError
from .spectra import FieldContext, Spectrum, SpectrumSet

__version__ = "0.1.0"

__all__ = ['CestError', 'FieldContext', 'Spectrum', 'SpectrumSet', '__version__']
