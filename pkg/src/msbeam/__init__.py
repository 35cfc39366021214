"""Multi-satellite beamspace MIMO precoding with statistical CSI."""
__version__ = "0.1.0"
