"""Backend selection for the hot kernels.

Prefers the compiled extension when it was built; otherwise falls back to
the pure-Python twin. ``BACKEND`` reports which one is active.
"""

try:
    from sliceguard import _kernels as _impl  # type: ignore[attr-defined]
except ImportError:  # extension not built
    from sliceguard import _kernels_py as _impl  # type: ignore[no-redef]

BACKEND: str = _impl.BACKEND

nvs_grants = _impl.nvs_grants
make_margin_fn = _impl.make_margin_fn
make_margin_batch_fn = _impl.make_margin_batch_fn
