from .config_loader import apply_override, build_config, load_config, parse_value
from .runner import (
    ExperimentWorld,
    assign_schedules,
    build_world,
    discard_round_keys,
    early_stop_check,
    epochs_to_target,
    invocation_duration,
    oracle_epochs_to_target,
    oracle_sequential_run,
    params_digest,
    run_epoch,
    run_experiment,
    run_instrumented,
    run_round,
)
from .serialization import epochs_to_csv, result_from_json, result_to_json, write_csv
from .state import persist_state, persisted_params, restore_state
from .sweep import SWEEP_KEYS, run_sweep, sweep_row

__all__ = [
    "SWEEP_KEYS",
    "ExperimentWorld",
    "apply_override",
    "assign_schedules",
    "build_config",
    "build_world",
    "discard_round_keys",
    "early_stop_check",
    "epochs_to_csv",
    "epochs_to_target",
    "invocation_duration",
    "load_config",
    "oracle_epochs_to_target",
    "oracle_sequential_run",
    "params_digest",
    "parse_value",
    "persist_state",
    "persisted_params",
    "restore_state",
    "result_from_json",
    "result_to_json",
    "run_epoch",
    "run_experiment",
    "run_instrumented",
    "run_round",
    "run_sweep",
    "sweep_row",
    "write_csv",
]
