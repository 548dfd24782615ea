"""Numerical Riemannian geometry of the energy functional S(g) = int s_g^2 dmu_g.

Metrics live on grid charts (flat tori, angular sphere charts and their
products); curvature is computed by differentiating the metric components.
"""

from .curvature import (bianchi_residual, christoffel, conformal_residual, delta_star,
                        divergence, gradient, hessian, laplacian, lie_derivative_metric, ricci,
                        scalar_curvature, vector_divergence)
from .errors import (ConfigError, ConformalityWarning, CurvfuncError, GridError, MetricError,
                     PreconditionError, SolverError)
from .fields import (MetricField, ScalarField, SymTensorField, VectorField, field_norm,
                     integrate, l2_norm, linf_norm, normalize_volume, partial_derivative,
                     pointwise_inner, project_constants, trace, trace_free_part)
from .flows import (FlowTrace, compute_Lambda, gradient_flow_run, level_set_hessian_check,
                    perturbed_yamabe_run, solve_perturbation_v, yamabe_flow_run)
from .functionals import (critical_residual, einstein_te_residuals, energy_S,
                          first_variation_checks, functional_report, grad_S, hilbert_H,
                          kazdan_warner_integral, lambda_multiplier, lemma3_classify,
                          pairing_fact, second_variation_form, trace_residual)
from .grid import GridChart, build_torus_grid, product_chart, sphere_chart_grid
from .models import (conformal_deform, flat_torus, from_descriptor, product_spheres,
                     random_function, random_perturbation, round_sphere_chart,
                     translation_field)
from .trace_equation import (embed_ode_profile, ode_integrate, ode_period_quadrature,
                             pde_residual, pde_solve_torus, trace_equation_scaling)

__version__ = "0.1.0"
