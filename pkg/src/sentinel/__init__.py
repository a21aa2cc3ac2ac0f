"""Verification of mobile crowd-sensing reports: synthetic populations with
colluding adversaries, density clustering for bootstrap labels, four
classifiers, and a drift-aware streaming pipeline.
"""

__version__ = "0.1.0"

from .core import LEGIT, MALICIOUS, GaussianSpec, Label, Provenance, Report, SensingTask
from .learn import ALL_VARIANTS, HyperParams, Variant

__all__ = [
    "LEGIT",
    "MALICIOUS",
    "GaussianSpec",
    "Label",
    "Provenance",
    "Report",
    "SensingTask",
    "ALL_VARIANTS",
    "HyperParams",
    "Variant",
    "__version__",
]
