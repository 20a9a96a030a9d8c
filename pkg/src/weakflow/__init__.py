"""weakflow: mean-momentum flow lines of a paraxial beam from weak values.

Subpackages: ``beam`` (analytic two-slit Gaussian beam), ``weakfield``
(weak Poynting values and flow lines), ``polarimetry`` (thin-calcite weak
measurement and inversion), ``modes`` (normal-mode Bohm field theory),
``cli`` (scenario runner).
"""

__version__ = "0.1.0"

from . import beam, errors, kernels, modes, polarimetry, weakfield  # noqa: F401
