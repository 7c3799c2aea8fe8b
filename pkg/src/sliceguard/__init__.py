"""Deterministic sliced-RAN downlink simulator with a closed
anomaly-mitigation control loop: per-slice PRB scheduling, sliding-window
tree-ensemble anomaly detection, and a controller that throttles and
ultimately releases anomalous UEs.
"""

__version__ = "0.1.0"

from sliceguard.kernels import BACKEND as KERNEL_BACKEND  # noqa: F401
