"""spurlab: exact toy lab for masked-prediction pretraining and spurious features."""

__version__ = "0.1.0"
