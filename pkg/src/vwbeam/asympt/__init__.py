"""Norms, energy bound, net classification and the uniqueness/consistency probes."""
from .classify import SweepReport, Verdict, classify_net
from .norms import (EnergyConstants, NormReport, dual_h2_norm, ehrling_constant,
                    energy_bound_check, energy_constants, error_E_L2, norm_report,
                    spatial_norms, w_difference, w_norm)
from .probes import ProbeResult, consistency_probe, uniqueness_probe

__all__ = [
    "SweepReport", "Verdict", "classify_net", "EnergyConstants", "NormReport", "dual_h2_norm",
    "ehrling_constant", "energy_bound_check", "energy_constants", "error_E_L2", "norm_report",
    "spatial_norms", "w_difference", "w_norm", "ProbeResult", "consistency_probe",
    "uniqueness_probe",
]
