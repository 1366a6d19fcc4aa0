"""Coupling-averaged thermal echoes of XX-type chains and the unitary
matrix model behind them: Bessel-kernel Toeplitz determinants, planar
saddle thermodynamics, coupling-average engines, identity audits, and a
reproducible scan CLI."""

from .logvalue import LogValue
from .specfun import (bessel_i_scaled, generalized_bessel,
                      generalized_bessel_scaled)
from .chain import (INFINITE, ChainSpec, DispersionModel, OccupationState,
                    amplitude, dispersion_from_couplings, ed_oracle_echo,
                    fermion_amplitude, log_normalized_echo, normalized_echo,
                    propagator, psi0, psi_impurity)
from .gww import (GwwParams, Phase, PlanarResult, a_of_T, T_of_a,
                  gww_log_partition, multi_coupling_log_partition,
                  planar_free_energy, planar_polyakov, saddle_entropy,
                  sourced_entropy_density, transition_temperature)
from .average import (AverageParams, AverageResult, EchoFunction,
                      NestedParams, QuadratureError, averaged_echo,
                      complex_temperature_average, gaussian_average,
                      mc_gaussian_average, multi_gaussian_average,
                      nested_average)

__version__ = "0.1.0"

__all__ = [
    "LogValue", "bessel_i_scaled", "generalized_bessel",
    "generalized_bessel_scaled", "INFINITE", "ChainSpec", "DispersionModel",
    "OccupationState", "amplitude", "dispersion_from_couplings",
    "ed_oracle_echo", "fermion_amplitude", "log_normalized_echo",
    "normalized_echo", "propagator", "psi0", "psi_impurity", "GwwParams",
    "Phase", "PlanarResult", "a_of_T", "T_of_a", "gww_log_partition",
    "multi_coupling_log_partition", "planar_free_energy", "planar_polyakov",
    "saddle_entropy", "sourced_entropy_density", "transition_temperature",
    "AverageParams", "AverageResult", "EchoFunction", "NestedParams",
    "QuadratureError", "averaged_echo", "complex_temperature_average",
    "gaussian_average", "mc_gaussian_average", "multi_gaussian_average",
    "nested_average",
]
