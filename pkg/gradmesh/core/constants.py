from typing import Final

# Wire format
FRAME_HEADER_BYTES: Final[int] = 8
FLOAT_BYTES: Final[int] = 8
QUEUE_ENVELOPE_BYTES: Final[int] = 64

# Significance filter denominator guard
SIGNIFICANCE_EPSILON: Final[float] = 1e-12

# Model / data defaults
INIT_WEIGHT_RANGE: Final[float] = 0.01
FINITE_DIFF_EPS: Final[float] = 1e-5

# Duration model: forward + backward work per parameter per example
FLOPS_PER_PARAM_EXAMPLE: Final[float] = 6.0

# Barrier
DEFAULT_POLL_BUDGET: Final[int] = 10_000
DEFAULT_BARRIER_PHASE: Final[str] = "sync"

# Event log length for `run --events-out` when GRADMESH_EVENT_LOG_LIMIT is 0
EVENTS_OUT_LIMIT: Final[int] = 1_000_000

# Early stopping
DEFAULT_PATIENCE: Final[int] = 3
DEFAULT_MIN_DELTA: Final[float] = 0.001

# Cost regression tolerances
COST_MATCH_TOLERANCE: Final[float] = 0.005
COST_MISMATCH_THRESHOLD: Final[float] = 0.01
DISPLAY_SIGNIFICANT_FIGURES: Final[int] = 4

# Substrate key templates; namespaced strategy/round/worker/part so keys never collide
GRAD_KEY: Final[str] = "{strategy}:r{round}:w{worker}:grad"
MINIBATCH_GRAD_KEY: Final[str] = "{strategy}:r{round}:w{worker}:mb{part}"
LOCAL_AVG_KEY: Final[str] = "{strategy}:r{round}:w{worker}:local_avg"
PEER_AVG_KEY: Final[str] = "{strategy}:r{round}:w{worker}:peer{part}"
AGGREGATE_KEY: Final[str] = "{strategy}:r{round}:aggregate"
WORKER_AGGREGATE_KEY: Final[str] = "{strategy}:r{round}:w{worker}:aggregate"
CHUNK_KEY: Final[str] = "{strategy}:r{round}:w{worker}:chunk{part}"
PARTIAL_KEY: Final[str] = "{strategy}:r{round}:partial{part}"
UPDATE_KEY: Final[str] = "{strategy}:r{round}:w{worker}:update"
ROUND_KEY_PREFIX: Final[str] = "{strategy}:r{round}:"
OBJECT_PREFIX: Final[str] = "{strategy}/r{round}/"
OBJECT_KEY: Final[str] = "{strategy}/r{round}/w{worker}"
PARAMS_STATE_KEY: Final[str] = "state:w{worker}:params"
RESIDUAL_STATE_KEY: Final[str] = "state:w{worker}:residual"
BARRIER_KEY: Final[str] = "barrier:r{round}:{phase}"

# Barrier phases used by multi-step protocols
GRADS_PHASE: Final[str] = "grads"
AGGREGATE_PHASE: Final[str] = "aggregate"
CHUNKS_PHASE: Final[str] = "chunks"
PARTIALS_PHASE: Final[str] = "partials"
UPLOADS_PHASE: Final[str] = "uploads"

# AllReduce master and MLLess supervisor identities
MASTER_WORKER: Final[int] = 0
SUPERVISOR_ID: Final[int] = -1
