"""Convert model checkpoints (dense or pruned) into sparse-topology containers."""

from .export import ExportError, export, load_checkpoint, magnitude_mask

__version__ = "0.1.0"

__all__ = ["ExportError", "export", "load_checkpoint", "magnitude_mask"]
