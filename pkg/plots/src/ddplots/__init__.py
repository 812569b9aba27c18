"""Figure rendering for the distdelay CLI's CSV bundles."""

from .figures import ColumnError, LAYOUTS, read_csv, render

__all__ = ["ColumnError", "LAYOUTS", "read_csv", "render"]
