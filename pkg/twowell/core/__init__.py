"""
TwoWell Core Package
"""

from .base import (
    BaseReport,
    TwoWellError,
    ConfigError,
    DomainError,
    DegenerateError,
    AdmissibilityError,
    LensError,
    ShapeError,
    GridIndexError,
    ResolutionError,
    ConvergenceError,
    HypothesisError,
    FitError
)

from .logger import logger, setup_logger, set_console_level

from .matrixcore import (
    IDENTITY,
    rotation,
    frobenius_norm,
    det2,
    operator_norm,
    nearest_rotation,
    dist_so2,
    dist_well,
    dist_right_well,
    well_projection,
    polar_decompose,
    symmetrize_well,
    rank_one_decompose,
    shear_normal_form,
    inverse_distance_ratio,
    WellPair
)

from .fields import (
    GridSpec,
    ScalarField,
    VectorField,
    EnergyBreakdown,
    gradient_field,
    gradient,
    elastic_density,
    inverse_elastic_density,
    elastic_density_field,
    interface_length,
    total_energy,
    ball_mask,
    elastic_energy_ball,
    segment_energy,
    bilip_constant,
    invert_points,
    pushforward_chi,
    disc_field,
    nonsingular_points,
    write_field,
    read_field
)

from .construction import (
    lens_area,
    lens_diameter,
    CutoffProfile,
    LensConstruction,
    solve_lens,
    u0,
    deformation,
    Configuration,
    build_configuration,
    outside_lens_cells,
    AdmissibilityReport,
    admissibility_report,
    DecompositionFit,
    fit_energy_decomposition
)

from .minimizer import (
    RelaxConfig,
    RelaxResult,
    elastic_gradient,
    relax,
    GridPolicy,
    SweepRecord,
    RegimeFit,
    ScalingFit,
    fit_power_law,
    run_sweep_point,
    fit_regimes,
    scaling_sweep
)

from .rigidity import (
    RigidityConstants,
    Ball,
    Rhombus,
    LineSelection,
    RhombusReport,
    RadiusInfo,
    CoveringReport,
    good_horizontal_lines,
    good_vertical_lines,
    weighted_energy,
    rigid_fit,
    small_set_hypothesis,
    find_good_rhombus,
    bad_set_measure,
    lower_bound_ratio,
    covering_radius,
    radius_bound,
    all_covering_radii,
    vitali_cover
)

from .config import (
    TOOL_VERSION,
    DEFAULTS,
    load_config,
    save_config,
    RunConfig
)

__all__ = [
    # Base classes
    'BaseReport',
    # Exceptions
    'TwoWellError',
    'ConfigError',
    'DomainError',
    'DegenerateError',
    'AdmissibilityError',
    'LensError',
    'ShapeError',
    'GridIndexError',
    'ResolutionError',
    'ConvergenceError',
    'HypothesisError',
    'FitError',
    # Logging
    'logger',
    'setup_logger',
    'set_console_level',
    # Matrix kernels
    'IDENTITY',
    'rotation',
    'frobenius_norm',
    'det2',
    'operator_norm',
    'nearest_rotation',
    'dist_so2',
    'dist_well',
    'dist_right_well',
    'well_projection',
    'polar_decompose',
    'symmetrize_well',
    'rank_one_decompose',
    'shear_normal_form',
    'inverse_distance_ratio',
    'WellPair',
    # Fields
    'GridSpec',
    'ScalarField',
    'VectorField',
    'EnergyBreakdown',
    'gradient_field',
    'gradient',
    'elastic_density',
    'inverse_elastic_density',
    'elastic_density_field',
    'interface_length',
    'total_energy',
    'ball_mask',
    'elastic_energy_ball',
    'segment_energy',
    'bilip_constant',
    'invert_points',
    'pushforward_chi',
    'disc_field',
    'nonsingular_points',
    'write_field',
    'read_field',
    # Construction
    'lens_area',
    'lens_diameter',
    'CutoffProfile',
    'LensConstruction',
    'solve_lens',
    'u0',
    'deformation',
    'Configuration',
    'build_configuration',
    'outside_lens_cells',
    'AdmissibilityReport',
    'admissibility_report',
    'DecompositionFit',
    'fit_energy_decomposition',
    # Minimizer
    'RelaxConfig',
    'RelaxResult',
    'elastic_gradient',
    'relax',
    'GridPolicy',
    'SweepRecord',
    'RegimeFit',
    'ScalingFit',
    'fit_power_law',
    'run_sweep_point',
    'fit_regimes',
    'scaling_sweep',
    # Rigidity
    'RigidityConstants',
    'Ball',
    'Rhombus',
    'LineSelection',
    'RhombusReport',
    'RadiusInfo',
    'CoveringReport',
    'good_horizontal_lines',
    'good_vertical_lines',
    'weighted_energy',
    'rigid_fit',
    'small_set_hypothesis',
    'find_good_rhombus',
    'bad_set_measure',
    'lower_bound_ratio',
    'covering_radius',
    'radius_bound',
    'all_covering_radii',
    'vitali_cover',
    # Config
    'TOOL_VERSION',
    'DEFAULTS',
    'load_config',
    'save_config',
    'RunConfig'
]
