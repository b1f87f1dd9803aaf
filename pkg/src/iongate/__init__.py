"""Geometric phase gates and Ising couplings from state-dependent forces on ion chains."""
import os

__version__ = "0.1.0"

# BLAS pools are sized when numpy loads, so the cap must be applied before any import below.
if os.environ.get("IONGATE_THREADS"):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, os.environ["IONGATE_THREADS"])

from .chain import TrapKind, TrapSetup, NormalModeBasis, chain_modes, common_chain  # noqa: E402
from .kernel import GATE_PHASE, accumulated_coupling, closure_residual  # noqa: E402
from .profiles import DissipationModel, FourierProfile, KickTrain, SegmentedProfile  # noqa: E402

__all__ = [
    "TrapKind", "TrapSetup", "NormalModeBasis", "chain_modes", "common_chain",
    "GATE_PHASE", "accumulated_coupling", "closure_residual",
    "DissipationModel", "FourierProfile", "KickTrain", "SegmentedProfile",
]
