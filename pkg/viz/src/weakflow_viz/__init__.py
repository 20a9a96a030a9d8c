"""Figure generation from weakflow CLI output files."""

__version__ = "0.1.0"

from .io import SchemaError, read_field, read_flowlines, read_packet, rms_deviation  # noqa: F401
from .plots import PlotSpec, plot  # noqa: F401
