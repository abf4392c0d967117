from . import ascii  # pylint: disable=unused-import
from .table import SCHEMAS, MetricTable
