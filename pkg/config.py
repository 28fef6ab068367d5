# filename: config.py
import os
from typing import Optional

# --- Output Configuration ---
# Get the absolute path to the directory where this config file is located
BASE_DIR = os.path.dirname(os.path.abspath(__file__))
# RLCT_OUTPUT_DIR is the only environment override honoured by the CLI
OUTPUT_DIR: str = os.environ.get("RLCT_OUTPUT_DIR", os.path.join(os.getcwd(), "rlct_runs"))
LEDGER_DB_NAME = "rlct_ledger.db"
POINTS_SUBDIR = "points"
PLOT_DATA_SUBDIR = "plot_data"


# --- Ground Truth Configuration ---
DEFAULT_DELTA = 0.05  # K0 = [delta, 1 - delta]
COLUMN_SUM_TOL = 1e-12
MINIMALITY_RANK_TOL = 1e-8
MINIMALITY_COLUMN_DIST = 1e-3
TRUTH_MAX_DRAWS = 1000  # rejection budget for a minimal truth


# --- Volume-Scaling Estimator Configuration ---
VOLUME_NUM_SAMPLES = 2_000_000
VOLUME_MIN_SAMPLES = 10_000
VOLUME_T_MAX = 1e-2
VOLUME_T_MIN = 1e-6
VOLUME_T_POINTS = 24
VOLUME_MIN_HITS = 100
VOLUME_MIN_USABLE_THRESHOLDS = 4
VOLUME_BATCH_SIZE = 200_000
VOLUME_R2_WARNING = 0.98


# --- Posterior Sampler Configuration ---
GIBBS_SWEEPS = 500
GIBBS_BURNIN_FRACTION = 0.2
GIBBS_THIN = 5
PRIOR_ALPHA = 1.0
PRIOR_BETA = 1.0
RHAT_WARNING = 1.1
MH_STEPS = 20_000
MH_PROPOSAL_SCALE = 0.05
MH_ACCEPTANCE_RANGE = (0.05, 0.8)
MIN_REPLICATES = 30
MIN_MH_STEPS = 10_000


# --- Quadrature Configuration ---
QUADRATURE_MAX_DIM = 4
QUADRATURE_MIN_DEPTH = 32
QUADRATURE_REL_TOL = 1e-6
QUADRATURE_MAX_NODES = 20_000_000  # total tensor nodes per evaluation
QUADRATURE_CHUNK = 500_000


# --- Experiment Policy ---
PARTIAL_FAILURE_THRESHOLD = 0.10  # fraction of failed replicates before exit code 4
LOW_CONFIDENCE_N = 100  # model selection below this sample size is flagged
CI_Z = 1.959963984540054  # two-sided 95% normal quantile
PREDICTIVE_ROW_TOL = 1e-10


# --- Exit Codes ---
EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_GUARD = 3
EXIT_PARTIAL_FAILURE = 4


# --- Logging Configuration ---
LOG_LEVEL = "INFO"  # e.g., DEBUG, INFO, WARNING, ERROR
LOG_FILE_NAME = "rlct_lab.log"
LOG_FORMAT = "%(asctime)s [%(levelname)s] %(message)s (%(filename)s:%(lineno)d)"
LOG_DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

# Set to a path to log to a file from import time on; the CLI enables it per run instead
LOG_FILE: Optional[str] = None
