"""
isolab
======

Isomonodromic deformations of meromorphic connections as Hamiltonian flows
on Takiff coadjoint orbits: exact bracket identities, confluence of poles,
explicit Hamiltonians, Painlevé reductions and finite-dimensional
quantizations of the resulting (confluent) KZ systems.
"""

from .config import IsolabConfig
from .errors import IsolabError
from .verification import VerificationReport

__version__ = "0.1.0"

__all__ = ["IsolabConfig", "IsolabError", "VerificationReport", "__version__"]
