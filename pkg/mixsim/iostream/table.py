"""
Metric tables with fixed column schemas.
"""

from astropy.table import Table

#: the column order of every table written by mixsim
SCHEMAS = {
    "coupled_path": ("replicate", "t", "block_index", "disagree", "eta_block"),
    "disagreement_curve": ("s", "t", "disagree_rate", "se"),
    "decay_curve": ("t", "delta_hat", "disagree_hat", "se"),
    "bound_curve": ("n", "r", "bound", "tail_remainder", "schedule_r", "schedule_j"),
    "alpha_curve": ("lag", "alpha_restricted", "se", "exact_flag"),
    "coalescence": ("model", "m", "rho_hat", "replicates", "standard_error", "lower_bound"),
    "doeblin_corpus": ("matrix", "eta", "reconstruction_error", "maximal"),
    "lemma_corpus": ("chain", "s", "oracle", "bound_factor1", "bound_factor4"),
    "lemma3_corpus": ("triple", "t", "recursion", "bound"),
    "renewal": ("n", "bstar", "bstar_mc", "se"),
    "histogram": ("state", "backward", "forward", "exact"),
    "lipschitz": ("lam", "lam_prime", "link", "exact", "bound"),
    "alpha_sanity": ("joint", "rows", "cols", "alpha"),
}


class MetricTable(Table):
    """
    An :class:`astropy.table.Table` whose columns follow one of the fixed
    ``SCHEMAS``. It is read and written with the "mixsim.csv" format.
    """

    @classmethod
    def from_columns(cls, schema, columns):
        """
        Create a table from a list of columns given in the schema's order.

        Parameters
        ----------
        schema: str
            The schema name.
        columns: list
            The column data.
        """

        names = schema_columns(schema)
        if len(columns) != len(names):
            raise ValueError("Schema '{}' has {} columns, got {}".format(schema, len(names), len(columns)))
        table = cls(list(columns), names=names)
        table.meta["schema"] = schema
        return table

    @classmethod
    def from_table(cls, table, schema):
        """
        Reorder the columns of a table into the schema's order.
        """

        names = schema_columns(schema)
        missing = [name for name in names if name not in table.colnames]
        if missing:
            raise ValueError("Table is missing the column(s) {} of schema '{}'".format(missing, schema))
        out = cls([table[name] for name in names], names=names)
        out.meta["schema"] = schema
        return out

    @property
    def schema(self):
        return self.meta.get("schema", None)


def schema_columns(schema):
    try:
        return SCHEMAS[schema]
    except KeyError:
        raise ValueError("Unknown table schema '{}'; use one of {}".format(schema, sorted(SCHEMAS)))
