"""Exception hierarchy. Every error raised by the engine derives from CQEnumError."""


class CQEnumError(Exception):
    pass


class IoError(CQEnumError, OSError):
    pass


class ArityMismatch(CQEnumError):
    pass


class UnknownRelation(CQEnumError):
    pass


class BadPositions(CQEnumError):
    pass


class QuerySyntaxError(CQEnumError):
    pass


class DuplicateQuantifier(QuerySyntaxError):
    pass


class QuantifiedVarUnused(QuerySyntaxError):
    pass


class ScopeError(CQEnumError):
    pass


class NotSubsetClosed(CQEnumError):
    pass


class TooManyVariables(CQEnumError):
    pass


class InvalidTD(CQEnumError):
    pass


class NotAcyclic(CQEnumError):
    pass


class NotFreeConnex(CQEnumError):
    pass


class BadM(CQEnumError):
    pass


class TrivialRefinement(CQEnumError):
    pass


class NotNested(CQEnumError):
    pass


class NotViolating(CQEnumError):
    pass


class DepthExceeded(CQEnumError):
    pass


class BadBase(CQEnumError):
    pass


class EmptyTDList(CQEnumError):
    pass


class DomainMismatch(CQEnumError):
    pass


class SchemaMismatch(CQEnumError):
    pass


class TooLarge(CQEnumError):
    pass


class WidthExceeded(CQEnumError):
    """No enumerated free-connex decomposition fits the width bound for some refinement."""

    def __init__(self, message, refinement_index=None, best_cost=None):
        super().__init__(message)
        self.refinement_index = refinement_index
        self.best_cost = best_cost
