"""Curvature energies, beta numbers and tangent-plane estimates on weighted point clouds."""

__version__ = "0.1.0"

from .balanced import (Balanced, Concentrated, FatSimplexStat, balanced_dichotomy, certify_dichotomy,
                       fat_fraction, fat_simplex_search, x_delta_member)
from .curvatures import (CurvatureKind, curvature, h_min, k_integrand, kappa, kappa_dls, kappa_h,
                         kappa_max, kappa_min, pm_sin)
from .energy import BetaNumber, EnergyEstimate, beta_number, j_energy, k_energy, k_kernel, menger_energy
from .errors import (CsvFormatError, DegenerateSpan, DimensionMismatch, EmptyBall, MrectError, NoFatTuple,
                     NoValidBranch, RepeatedVertex, ZeroDirection)
from .generators import (C1BetaGraph, Fixture, GraphSpec, gen_c1beta_graph, gen_cantor4, gen_plane,
                         gen_segment, gen_sphere)
from .geom import (Plane, SimplexTuple, diam, dist_to_affine, gram_volume, plane_distance, plane_from_vectors,
                   project, reject, simplex_volume, tilt_norm)
from .measure import (PointCloud, ball_mass, cone_members, density_profile, read_cloud_csv, stratify,
                      tangent_containment_defect, write_cloud_csv)
from .tangent import (BadSetFilter, ScaleProfile, TangentEstimate, TangentParams, bad_set_Y,
                      dyadic_plane_sequence, plane_at_scale, schatzle_diagnostic, taylor_sandwich_check)
