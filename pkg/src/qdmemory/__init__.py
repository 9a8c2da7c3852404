"""Simulation and analysis of quantum-dot single photons stored in a warm-vapor ladder memory.

Modules follow the optical path: ``spectra`` (lineshapes and overlaps),
``source`` (emitter), ``chain`` (losses, cell, etalon), ``memory``
(read-in, dephasing, retrieval), ``detection`` (histograms, HBT, FPI scans)
and ``analysis`` (fits and figures of merit).  ``pipeline`` and ``cli`` tie
them together around a ``scenario`` file.
"""
from .errors import (
    ExtrapolationError,
    FormatError,
    InsufficientDataError,
    ParameterError,
    ScenarioError,
    UnsupportedCombinationError,
)
from .scenario import Scenario, load, loads, reference_scenario

__version__ = "0.1.0"

__all__ = [
    "ExtrapolationError",
    "FormatError",
    "InsufficientDataError",
    "ParameterError",
    "Scenario",
    "ScenarioError",
    "UnsupportedCombinationError",
    "load",
    "loads",
    "reference_scenario",
]
