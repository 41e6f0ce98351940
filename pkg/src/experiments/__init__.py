"""
Experiment plumbing - settings, experiment configs and result writers
"""

from .settings import DEFAULT_SETTINGS, configure_logging, load_settings
from .config_loader import SCHEME_NAMES, ExperimentConfig, dump_experiment, load_experiment
from .writers import FORMATS, render_table, round_significant, write_table
