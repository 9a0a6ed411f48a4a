# Package version and the numerical guards shared by the solvers; .env is read once on import.
from dotenv import load_dotenv

load_dotenv()

VERSION = "0.1.0"

# |u| above this aborts an evolution with Diverged
DIVERGENCE_LIMIT = 1e6
# smallest soft-region mass accepted by region averages
REGION_EPS = 1e-12
