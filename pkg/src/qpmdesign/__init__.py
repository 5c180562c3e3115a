"""Design engine for SPDC photon-pair sources in periodically poled KTP-family crystals."""

__version__ = "0.1.0"
