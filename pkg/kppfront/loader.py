"""Coefficient definition files (JSON or TOML)."""

from __future__ import annotations

import json
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator

from kppfront.core.coeff import (
    Kernel,
    MollifierSpec,
    PeriodicCoefficient,
    PiecewiseConstant,
    SmoothSamples,
    make_atoms,
    make_constant,
    make_delta_comb,
    make_mixture,
    make_piecewise,
    make_samples,
    make_shigesada,
    mollify,
    shift,
)
from kppfront.exceptions import InvalidParameterError


class ContinuousPart(BaseModel):
    """Continuous part of a mixture: step profile or samples."""

    breakpoints: Optional[List[float]] = None
    levels: Optional[List[float]] = None
    values: Optional[List[float]] = None

    @model_validator(mode="after")
    def check_shape(self) -> "ContinuousPart":
        """Exactly one representation."""
        steps = self.breakpoints is not None and self.levels is not None
        if steps == (self.values is not None):
            raise ValueError("give either breakpoints+levels or values")
        return self

    def build(self) -> Union[PiecewiseConstant, SmoothSamples]:
        if self.values is not None:
            return SmoothSamples(np.asarray(self.values, dtype=float))
        return PiecewiseConstant(np.asarray(self.breakpoints), np.asarray(self.levels))


class MollifierOptions(BaseModel):
    """Optional smoothing of the atoms after loading."""

    width: float = Field(gt=0)
    kernel: Kernel = Kernel.TRIANGLE
    samples: int = Field(1024, ge=16)


class CoefficientFile(BaseModel):
    """Validated content of a coefficient file."""

    period: float = Field(gt=0)
    alpha: float = Field(gt=0)
    kind: Literal["constant", "delta_comb", "shigesada", "samples", "piecewise", "atoms", "mixture"]
    fraction: Optional[float] = None
    contrast: Optional[float] = None
    values: Optional[List[float]] = None
    breakpoints: Optional[List[float]] = None
    levels: Optional[List[float]] = None
    atoms: Optional[List[Tuple[float, float]]] = None
    continuous: Optional[ContinuousPart] = None
    shift: float = 0.0
    mollify: Optional[MollifierOptions] = None

    @model_validator(mode="after")
    def check_kind_fields(self) -> "CoefficientFile":
        """Each kind needs its own fields."""
        required: Dict[str, Tuple[str, ...]] = {
            "shigesada": ("fraction",),
            "samples": ("values",),
            "piecewise": ("breakpoints", "levels"),
            "atoms": ("atoms",),
            "mixture": ("continuous", "atoms"),
        }
        missing = [f for f in required.get(self.kind, ()) if getattr(self, f) is None]
        if missing:
            raise ValueError(f"kind {self.kind!r} needs {', '.join(missing)}")
        return self

    def build(self) -> PeriodicCoefficient:
        """Construct and validate the coefficient."""
        a, L = self.alpha, self.period
        b: PeriodicCoefficient
        if self.kind == "constant":
            b = make_constant(a, L)
        elif self.kind == "delta_comb":
            b = make_delta_comb(a, L)
        elif self.kind == "shigesada":
            b = make_shigesada(a, L, float(self.fraction or 0.0), self.contrast)
        elif self.kind == "samples":
            b = make_samples(a, L, self.values or [])
        elif self.kind == "piecewise":
            b = make_piecewise(a, L, self.breakpoints or [], self.levels or [])
        elif self.kind == "atoms":
            b = make_atoms(a, L, self.atoms or [])
        else:
            assert self.continuous is not None
            b = make_mixture(a, L, self.continuous.build(), self.atoms or [])
        if self.shift:
            b = shift(b, self.shift)
        if self.mollify is not None:
            b = mollify(b, MollifierSpec(self.mollify.width, self.mollify.kernel), self.mollify.samples)
        return b


def read_document(path: Union[str, Path]) -> Dict[str, Any]:
    """Parse a JSON or TOML file, chosen by suffix."""
    p = Path(path)
    if p.suffix.lower() == ".toml":
        with p.open("rb") as fh:
            return tomllib.load(fh)
    if p.suffix.lower() == ".json":
        with p.open("r", encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise InvalidParameterError(f"{p}: top level must be an object")
        return data
    raise InvalidParameterError(f"{p}: unsupported file type {p.suffix!r} (use .json or .toml)")


def load_coefficient(path: Union[str, Path]) -> PeriodicCoefficient:
    """Read, validate and build the coefficient described in ``path``."""
    try:
        spec = CoefficientFile.model_validate(read_document(path))
    except ValidationError as e:
        raise InvalidParameterError(f"{path}: {e}") from e
    return spec.build()
