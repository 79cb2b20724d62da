"""Typed error hierarchy shared by all hyphin modules.

Every error carries a short machine-readable ``kind`` used by the CLI to
emit a single ``ERROR <TAB> kind <TAB> detail`` diagnostic line.
"""


class HyphinError(Exception):
    kind = "error"


class DimensionError(HyphinError):
    """Shape mismatch between operands."""

    kind = "dimension"


class DegenerateRowError(HyphinError):
    """A row-wise operation hit a row with no valid entries."""

    kind = "degenerate-row"


class ContractError(HyphinError):
    """An operation was called outside its documented contract."""

    kind = "contract"


class IngestionError(HyphinError):
    """A required input file is missing or unreadable."""

    kind = "ingestion"


class ReferentialIntegrityError(HyphinError):
    """A file row references an entity that does not exist."""

    kind = "integrity"


class FormatError(HyphinError):
    """A file row does not match the documented format."""

    kind = "format"


class SchemaError(HyphinError):
    """A meta-path or edge is inconsistent with the graph schema."""

    kind = "schema"


class InsufficientLabelsError(HyphinError):
    """A class has too few labeled nodes for the requested split."""

    kind = "insufficient-labels"


class ConfigError(HyphinError):
    """A configuration value is out of range or unknown."""

    kind = "config"


class EmptyInputError(HyphinError):
    """An operation received an empty collection it cannot work with."""

    kind = "empty-input"


class DegenerateEmbeddingError(HyphinError):
    """A zero-norm embedding row reached a cosine computation."""

    kind = "degenerate-embedding"


class DivergenceError(HyphinError):
    """Training produced a non-finite loss or parameter."""

    kind = "divergence"

    def __init__(self, message, epoch=None, report=None, partial_log=None):
        super().__init__(message)
        self.epoch = epoch
        self.report = report
        self.partial_log = partial_log if partial_log is not None else []


class ProtocolError(HyphinError):
    """An evaluation protocol precondition was violated."""

    kind = "protocol"


class CompatibilityError(HyphinError):
    """A checkpoint does not match the graph it is applied to."""

    kind = "compatibility"


class ReportError(HyphinError):
    """A result table is empty or contains duplicate keys."""

    kind = "report"
