"""SDN-enabled IXP fabric controller and monitoring system."""

__version__ = "0.1.0"
