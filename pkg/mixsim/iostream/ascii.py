"""
CSV I/O registrations for mixsim.iostream.MetricTable objects
"""

from .readers import register_metric_io
from .table import MetricTable

# -- registration -------------------------------------------------------------

register_metric_io(MetricTable, format="mixsim.csv")
