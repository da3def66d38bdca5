"""Norms, chaining distances, and Monte Carlo CLT audits for random fields."""

__version__ = "0.1.0"

from .clt import (CltExperiment, CltReport, Ecdf, clt_verdict, ecdf_distance,
                  holder_target_distance, kramer_clt_audit, limit_field,
                  limit_model, partial_sum_field, rectangle_clt_audit,
                  tightness_audit, tightness_chain_constant, write_report_csv,
                  write_report_json)
from .errors import HolderCltError
from .fields import (FieldModel, PathEnsemble, natural_distance_p,
                     natural_distance_psi, natural_phi, rosenthal_audit,
                     rosenthal_factor, simulate, theta_alpha)
from .geometry import (MetricMeasureSpace, arnold_imkeller_audit,
                       classify_measure, embedding_check, fit_ball_exponent,
                       load_space, save_space, tau_distance, tau_matrix,
                       v_functional, w_distance, w_matrix)
from .grand_lebesgue import (MomentFunction, PsiFunction,
                             fundamental_function, gaussian_moment, gpsi_norm,
                             psi_rosenthal, psi_theta)
from .holder import (GridField, ModulusSpec, fractional_sobolev_norm,
                     grr_audit, grr_audit_paths, grr_coefficient, holder_norm,
                     rectangle_holder_norm, rectangle_modulus)
from .orlicz import (ConvexSymbol, EmpiricalSample, YoungFunction, c_phi,
                     delta2_constant, orlicz_norm, phi_bar, phi_bar_young,
                     young_fenchel)

__all__ = [
    "__version__",
    "CltExperiment", "CltReport", "Ecdf", "clt_verdict", "ecdf_distance",
    "holder_target_distance", "kramer_clt_audit", "limit_field",
    "limit_model", "partial_sum_field", "rectangle_clt_audit",
    "tightness_audit", "tightness_chain_constant", "write_report_csv",
    "write_report_json",
    "HolderCltError",
    "FieldModel", "PathEnsemble", "natural_distance_p",
    "natural_distance_psi", "natural_phi", "rosenthal_audit",
    "rosenthal_factor", "simulate", "theta_alpha",
    "MetricMeasureSpace", "arnold_imkeller_audit", "classify_measure",
    "embedding_check", "fit_ball_exponent", "load_space", "save_space",
    "tau_distance", "tau_matrix", "v_functional", "w_distance", "w_matrix",
    "MomentFunction", "PsiFunction", "fundamental_function",
    "gaussian_moment", "gpsi_norm", "psi_rosenthal", "psi_theta",
    "GridField", "ModulusSpec", "fractional_sobolev_norm", "grr_audit",
    "grr_audit_paths", "grr_coefficient", "holder_norm",
    "rectangle_holder_norm", "rectangle_modulus",
    "ConvexSymbol", "EmpiricalSample", "YoungFunction", "c_phi",
    "delta2_constant", "orlicz_norm", "phi_bar", "phi_bar_young",
    "young_fenchel",
]
