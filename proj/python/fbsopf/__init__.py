"""Linear OPF and storage sizing for radial low-voltage grids."""

import os

from ._core import (  # noqa: F401
    Branch,
    Bus,
    BusKind,
    BibcMatrix,
    ConvergenceRow,
    ConvergenceStudy,
    DispatchSolution,
    InputError,
    LimitViolation,
    LinearGridModel,
    OpfError,
    PerUnitBase,
    PowerFlowError,
    PowerFlowResult,
    ProjectionReport,
    RadialNetwork,
    Scenario,
    SweepRow,
    SynthProfiles,
    ValidationReport,
    ViabilityStudy,
    __version__,
    build_bibc,
    load_grid,
    load_scenario,
    project_dispatch,
    pwl_loss_eval,
    run_convergence_study,
    run_opf,
    run_viability_study,
    solve_power_flow,
    synth_profiles,
    truncate_scenario,
    validate_network,
)


def data_dir():
    """Directory with the bundled grid and scenario assets."""
    env = os.environ.get("FBSOPF_DATA_DIR")
    if env:
        return env
    return os.path.join(os.path.dirname(__file__), "data")


def asset_path(name):
    return os.path.join(data_dir(), name)
