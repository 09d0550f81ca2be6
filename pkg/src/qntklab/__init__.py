"""qntklab: hybrid quantum-classical networks and their tangent-kernel theory."""

__version__ = "0.1.0"
