"""Experiment workbench: campaigns, batch selection, sweeps and the CLI."""

from .campaign import agent_seed, default_generator_theta, generate_campaign, load_campaign, simulate_campaign
from .config import ExperimentConfig
from .io import TrajectoryParseError, ingest_trajectory_csv, write_trajectory_csv
from .sweeps import MismatchMatrix, SweepResult, run_selection_batch, sweep_holdout, sweep_penalty
