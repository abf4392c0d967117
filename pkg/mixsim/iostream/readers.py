"""
Reading and writing metric tables as CSV with a fixed column order.
"""

from astropy.io import registry as io_registry
from astropy.table import Table

from .table import SCHEMAS, MetricTable, schema_columns

# -- read ---------------------------------------------------------------------


def read_metric_csv(input_, table_type=MetricTable, schema=None, **kwargs):
    """
    Read a metric table from a CSV file.

    Parameters
    ----------
    input_: str, file
        The CSV file to read.
    table_type: type
        The returned table type.
    schema: str
        The expected schema. If not given it is identified from the header.
    """

    data = Table.read(input_, format="ascii.csv", **kwargs)

    if schema is None:
        for name, columns in SCHEMAS.items():
            if tuple(data.colnames) == columns:
                schema = name
                break
        else:
            raise IOError("Columns {} do not match any metric table schema".format(data.colnames))
    elif tuple(data.colnames) != schema_columns(schema):
        raise IOError("Columns {} do not match the '{}' schema".format(data.colnames, schema))

    return table_type.from_table(data, schema)


# -- write --------------------------------------------------------------------


def write_metric_csv(table, output, schema=None, overwrite=True, **kwargs):
    """
    Write a metric table to CSV with the schema's column order and no
    metadata header, so that identical tables give identical bytes.

    Parameters
    ----------
    table: :class:`~mixsim.iostream.MetricTable`
        The table to write.
    output: str, file
        The file to write to.
    schema: str
        The schema (defaults to the table's own).
    """

    schema = schema or getattr(table, "schema", None) or table.meta.get("schema")
    if schema is None:
        raise ValueError("No schema given for the metric table")

    names = schema_columns(schema)
    plain = Table([table[name] for name in names], names=names)
    return plain.write(output, format="ascii.csv", overwrite=overwrite, **kwargs)


def register_metric_io(table_type, format="mixsim.csv", **defaults):
    """
    Register CSV read/write methods for the given table type. The format is
    always given explicitly since plain astropy CSV readers also match.
    """

    def _read(filepath, **kwargs):
        kwgs = defaults.copy()
        kwgs.update(kwargs)
        return read_metric_csv(filepath, table_type=table_type, **kwgs)

    def _write(table, output, **kwargs):
        kwgs = defaults.copy()
        kwgs.update(kwargs)
        return write_metric_csv(table, output, **kwgs)

    io_registry.register_reader(format, table_type, _read)
    io_registry.register_writer(format, table_type, _write)
