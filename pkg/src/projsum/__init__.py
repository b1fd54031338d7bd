"""projsum: decide and construct decompositions of positive operators into projections."""

from .core import (
    Decomposition,
    FeasibilityVerdict,
    InfeasibleError,
    Parts,
    Projection,
    RankOneProjection,
    Remainder,
    Spectrum,
    SpectrumEntry,
    SpectrumError,
    TailSpec,
    ValueSeq,
    classify,
    spectrum_from_json,
    split_parts,
)

__all__ = [
    "Decomposition",
    "FeasibilityVerdict",
    "InfeasibleError",
    "Parts",
    "Projection",
    "RankOneProjection",
    "Remainder",
    "Spectrum",
    "SpectrumEntry",
    "SpectrumError",
    "TailSpec",
    "ValueSeq",
    "classify",
    "spectrum_from_json",
    "split_parts",
]

__version__ = "0.1.0"
