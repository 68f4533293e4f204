"""Stochastic linear-optics realization of channels on single-photon d-rail qudits."""
from .channels import (ChoiState, KrausSet, apply_channel, choi_to_kraus, kraus_to_choi,
                       make_amplitude_damping, make_constant_output_mix, make_random_unitary_channel,
                       mix_kraus, validate)
from .optics import OpticalNetwork, compile_kraus, network_unitary, reck_decompose
from .realization import RealizationPlan, minimize_stochasticity, plan_channel, psucc_fixed

__version__ = "0.1.0"
