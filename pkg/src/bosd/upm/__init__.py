"""Observation models and their JSON hyperparameter blocks."""
from .base import FitResult, GenericBank, Upm, UpmBank
from .basis import BasisParams, BasisUpm, RadialBasis
from .features import band_features, epoch_features
from .gaussian import ConjugateGaussianUpm, GaussianState, GaussianUpm, NiwPrior
from .sine import ScaledSineUpm, SineParams

KINDS = ("gaussian", "scaled_sine", "basis")


def upm_class(kind: str, mode: str | None = None) -> type[Upm]:
    if kind == "gaussian":
        return ConjugateGaussianUpm if mode == "conjugate" else GaussianUpm
    if kind == "scaled_sine":
        return ScaledSineUpm
    if kind == "basis":
        return BasisUpm
    raise ValueError(f"unknown upm kind {kind!r}; expected one of {KINDS}")


def upm_from_dict(block: dict) -> Upm:
    if "kind" not in block:
        raise ValueError("upm block needs a 'kind' tag")
    return upm_class(block["kind"], block.get("mode")).from_dict(block)


__all__ = [
    "BasisParams", "BasisUpm", "ConjugateGaussianUpm", "FitResult", "GaussianState", "GaussianUpm",
    "GenericBank", "KINDS", "NiwPrior", "RadialBasis", "ScaledSineUpm", "SineParams", "Upm", "UpmBank",
    "band_features", "epoch_features", "upm_class", "upm_from_dict",
]
