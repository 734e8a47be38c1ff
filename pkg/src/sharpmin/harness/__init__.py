"""Config-driven experiment harness: validated configs, seeded runs, sweeps."""

from .config import ExperimentConfig, load_config, parse_config, vanilla_control
from .outputs import OUTPUT_ROOT_ENV, load_checkpoint, resolve_output_dir, write_outputs
from .run import RunResult, build_objective, draw_batch, initial_parameters, run
from .sweep import compare, expand_grid, sweep
