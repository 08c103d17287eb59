import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Logging
LOG_LEVEL = os.getenv("CCDS_LOG_LEVEL", "INFO")
LOG_FORMAT = os.getenv("CCDS_LOG_FORMAT", "json")

# Estimation defaults
TRIM_FLOOR = float(os.getenv("CCDS_TRIM_FLOOR", "0.001"))
ENSEMBLE_FOLDS = 5
MAX_BOOTSTRAP_REDRAWS = 10

# Execution
THREADS = int(os.getenv("CCDS_THREADS", str(os.cpu_count() or 1)))
OUTPUT_DIR = os.getenv("CCDS_OUTPUT_DIR", "./out")
