"""Migration trajectory reconstruction and indicators for author-publication
affiliation corpora."""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
