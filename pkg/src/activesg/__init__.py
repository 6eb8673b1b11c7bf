"""Active RGB-only 3D scene-graph construction at desk scale."""

__version__ = "0.1.0"
