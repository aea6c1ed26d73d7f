"""Time-domain loudness and sound-quality metrics on auditory filterbanks."""

from .signals import (CalibratedSignal, StimulusSpec, gen_am, gen_fm, gen_noise,
                      gen_sine, scale_to_loudness)

__all__ = [
    "CalibratedSignal",
    "StimulusSpec",
    "gen_sine",
    "gen_am",
    "gen_fm",
    "gen_noise",
    "scale_to_loudness",
]

__version__ = "0.1.0"
