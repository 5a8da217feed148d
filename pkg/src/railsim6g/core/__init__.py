"""Configuration, deterministic randomness, metric tables and the experiment runner."""
from .config import ConfigError, ScenarioConfig, ScenarioParseError, load_scenario, parse_scenario_text
from .metrics import MetricsError, MetricsTable, read_table, write_table
from .rng import stream, stream_id, trial_seeds
from .units import UnitError, parse_quantity, to_si

__all__ = [
    "ConfigError", "MetricsError", "MetricsTable", "ScenarioConfig", "ScenarioParseError",
    "UnitError", "load_scenario", "parse_quantity", "parse_scenario_text", "read_table",
    "stream", "stream_id", "to_si", "trial_seeds", "write_table",
]
