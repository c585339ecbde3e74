"""Joint energy beamforming and sensor amplification for wirelessly powered
distributed estimation."""
__version__ = "0.1.0"
