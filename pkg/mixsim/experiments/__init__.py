from .catalog import CATALOG
from .config import ExperimentConfig
from .runner import RunReport, Verdict, run
