"""Coverage probability of cooperative (CoMP) mmWave heterogeneous networks.

Two engines share one scenario description: ``analytic`` evaluates the
coverage integrals numerically and ``simulator`` estimates the same curves by
Monte Carlo.
"""

from .analytic import (LaplaceMode, QuadratureConfig, analytic_curve, cf_inversion,
                       coverage_nakagami_ub, coverage_nofading, coverage_rayleigh,
                       coverage_snr_nakagami, laplace_interference, laplace_noise,
                       residue_tail)
from .channel import (ArrayConfig, FadingModel, array_gain, f_upsilon, f_upsilon_table,
                      flat_top_constant, gain_power)
from .config import ScenarioFile, load_scenario, shipped_scenarios
from .curve import CoverageCurve
from .errors import (ClampingWarning, InsufficientPointsError, NonConvergenceError,
                     ResidueMismatchError, UnsupportedCoopError)
from .geometry import (NoiseConfig, OrderedPathloss, PathlossConfig, Scenario, TierConfig,
                       intensity, intensity_measure, joint_pathloss_pdf, noise_power,
                       sample_network)
from .simulator import SimConfig, estimate_coverage, simulate_sinr

__version__ = "0.1.0"
