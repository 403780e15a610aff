"""Link-level simulator of a multi-user hybrid analog/digital beamforming
downlink: planar-array analog beams per sub-array, per-subcarrier regularized
zero-forcing, Golay-trained reduced channel, and an SC-FDE waveform."""

from .arrays import (AnalogWeights, ArrayGeometry, HybridAnalogMatrix,
                     SteeringAngles, array_factor, build_analog_precoder,
                     quantize_phases, steering_vector)
from .channel import (BsArray, ChannelRealization, ImpairmentProfile, Ray,
                      apply_impairments, generate_channel, reduce_channel,
                      transmit)
from .golay import GolayPair, TrainingField, build_cef, estimate_reduced_channel, golay_pair
from .precoding import DigitalPrecoder, normalize, precode, rzf
from .scenario import Scenario, load_scenario, scenario_from_dict

__all__ = [
    "AnalogWeights", "ArrayGeometry", "HybridAnalogMatrix", "SteeringAngles",
    "array_factor", "build_analog_precoder", "quantize_phases", "steering_vector",
    "BsArray", "ChannelRealization", "ImpairmentProfile", "Ray",
    "apply_impairments", "generate_channel", "reduce_channel", "transmit",
    "GolayPair", "TrainingField", "build_cef", "estimate_reduced_channel",
    "golay_pair", "DigitalPrecoder", "normalize", "precode", "rzf",
    "Scenario", "load_scenario", "scenario_from_dict",
]

__version__ = "0.1.0"
