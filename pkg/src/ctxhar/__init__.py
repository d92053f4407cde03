"""Attribute-based activity recognition with process-step context."""
__version__ = "0.1.0"

from .attributes import (
    AttributeClassMap,
    ClassRepresentatives,
    bernoulli_likelihood,
    dap_classify,
    gdap_classify,
    ml_attribute_estimate,
    nn_classify,
)
from .context import corrupt_steps, load_bpm, load_step_priors
from .metrics import macro_f1, mutual_information
from .segments import SegmentTable, ingest_dataset, split_by_recording
from .simgen import default_scenario, generate, load_scenario

__all__ = [
    "AttributeClassMap",
    "ClassRepresentatives",
    "SegmentTable",
    "bernoulli_likelihood",
    "corrupt_steps",
    "dap_classify",
    "default_scenario",
    "gdap_classify",
    "generate",
    "ingest_dataset",
    "load_bpm",
    "load_scenario",
    "load_step_priors",
    "macro_f1",
    "ml_attribute_estimate",
    "mutual_information",
    "nn_classify",
    "split_by_recording",
]
