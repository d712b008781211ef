"""Exception types shared across the package.

Every error carries a stable machine-readable ``code`` that the HTTP
service maps into response bodies, so the codes are part of the public
contract and must not change casually.
"""


class UvatarError(Exception):
    code = "error"
    http_status = 400


class InvalidArgumentError(UvatarError, ValueError):
    code = "invalid-argument"
    http_status = 400


class DimensionMismatchError(InvalidArgumentError):
    code = "dimension-mismatch"


class OverlappingMasksError(InvalidArgumentError):
    code = "overlapping-masks"


class UnknownAttributeError(InvalidArgumentError):
    code = "unknown-attribute"


class EmptyMaskError(InvalidArgumentError):
    code = "empty-mask"


class UndefinedComparisonError(UvatarError):
    """Masked comparison has no texels to compare on."""

    code = "undefined-comparison"
    http_status = 422


class UnparseableCommandError(UvatarError):
    code = "unparseable-command"
    http_status = 422


class OffBodyError(UvatarError):
    code = "off-body"
    http_status = 422


class InvalidStrokeError(UvatarError):
    code = "invalid-stroke"
    http_status = 422


class NoMatchError(UvatarError):
    """No corpus entry matches the query for some body part."""

    code = "no-match"
    http_status = 422

    def __init__(self, part, message=None):
        self.part = part
        super().__init__(message or f"no corpus entry matches for part '{part}'")


class EmptyCorpusError(UvatarError):
    code = "empty-corpus"
    http_status = 422


class CorruptCorpusError(UvatarError):
    code = "corrupt-corpus"
    http_status = 500


class NotFoundError(UvatarError):
    code = "not-found"
    http_status = 404


class NothingToUndoError(UvatarError):
    code = "nothing-to-undo"
    http_status = 409
