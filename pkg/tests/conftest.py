import sys
from pathlib import Path

from hypothesis import HealthCheck, settings

# shared test helpers (oracles.py) live next to the test modules
sys.path.insert(0, str(Path(__file__).resolve().parent))

settings.register_profile(
    "deterministic",
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("deterministic")
