"""Harmonic maps from metric measure graphs into NPC spaces."""

from .geometry import (BarycenterError, DomainError, EuclideanSpace, HyperbolicPlane, MetricTree,
                       NpcPoint, NpcSpace, ProductSpace, WeightedPoints, barycenter,
                       barycenter_objective, dist, geodesic_point, inductive_mean, midpoint,
                       npc_comparison_defect, random_tree, tripod)
from .graph import (DomainSpec, GraphError, MetricMeasureGraph, ball, build_graph, doubling_constant,
                    grid_graph, path_graph, poincare_constant, random_graph, star_graph)
from .energy import (CONVENTIONS, EnergyReport, Mapping, RateFunction, convexity_defect,
                     distance_pullback, energy_density, energy_measure_of_map, energy_report,
                     ks_energy, ks_energy_kuwae_shioya, midpoint_map, scalar_mapping)
from .dirichlet import (OscillationReport, SolveReport, SolverError, initial_mapping, oscillation_decay,
                        random_admissible, scalar_laplacian_oracle, solve_dirichlet, uniqueness_check)
from .flow import FlowTrajectory, l2_comparison_defect, l2_distance, prox_step, run_flow
from .analysis import (DirichletForm, check_weak_subharmonic, energy_measure, form_value,
                       green_function, harnack_diagnostic, intrinsic_distance, liouville_diagnostic,
                       polarization_residual, strengthened_subharmonicity_gap)

__version__ = "0.1.0"
