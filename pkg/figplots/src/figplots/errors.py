class FigplotsError(Exception):
    pass


class EmptyInput(FigplotsError):
    """Input directory has no manifest or no trajectory CSVs."""


class SchemaMismatch(FigplotsError):
    """A trajectory CSV does not carry the columns the figure needs."""
