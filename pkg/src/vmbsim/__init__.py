"""Rotating-magnet Fabry-Perot ellipsometry: synthesis, analysis and limits."""

__version__ = "0.1.0"

from .constants import (  # noqa: E402,F401
    CONSTANTS,
    NATURAL_UNITS,
    cavity_amplification,
    convert_field,
    convert_pressure,
)
from .models import (  # noqa: E402,F401
    GAS_TABLE,
    AlpParams,
    McpParams,
    NonlinearLagrangianParams,
    alp_deltan,
    cotton_mouton_deltan,
    equivalent_pressure,
    mcp_chi,
    mcp_deltan,
    photon_photon_cross_section,
    qed_unitary_birefringence,
)
from .apparatus import (  # noqa: E402,F401
    AlpSource,
    ApparatusConfig,
    FixedDeltanSource,
    FixedEllipticitySource,
    GasSource,
    McpSource,
    NoiseModel,
    NullSource,
    QedVacuumSource,
    TimeSeriesRecord,
    read_record,
    write_record,
)
from .synth import cavity_ellipticity, single_pass_ellipticity, synthesize_run  # noqa: E402,F401
from .pipeline import (  # noqa: E402,F401
    CalibrationPhase,
    RunEstimate,
    analyze_record,
    block_fft,
    calibrate,
    combine_runs,
    demodulate,
    deltan_conversion,
    project_physical,
    rayleigh_sigma,
    weighted_average,
)
from .limits import (  # noqa: E402,F401
    BirefringenceLimit,
    ExclusionCurve,
    ReferenceResults,
    alp_exclusion,
    comparison_report,
    confidence_bound,
    cross_section_limit,
    mcp_exclusion,
)
