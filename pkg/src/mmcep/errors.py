"""Exception hierarchy shared by every mmcep module."""


class MMCEPError(Exception):
    """Base class for all engine errors."""


class ValidationError(MMCEPError, ValueError):
    """Input does not conform to the schema, a query, or a record format."""


# ontology

class DuplicateClass(ValidationError):
    pass


class UnknownParent(ValidationError):
    pass


class CycleDetected(ValidationError):
    pass


class UnknownClass(ValidationError):
    pass


class UnknownRule(ValidationError):
    pass


class DuplicateRelation(ValidationError):
    pass


class UnknownAttribute(ValidationError):
    pass


class AttributeDomainViolation(ValidationError):
    pass


class SchemaSyntaxError(ValidationError):
    def __init__(self, message, line, column=1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


# graph

class BadGeometry(ValidationError):
    pass


class OutOfOrderTimestamp(ValidationError):
    pass


# spatial

class DegenerateGeometry(ValidationError):
    pass


class UnsupportedGeometryPair(MMCEPError, TypeError):
    pass


class UndefinedPredicate(MMCEPError):
    pass


# temporal

class ImproperInterval(ValidationError):
    pass


class UnboundVariable(MMCEPError, NameError):
    pass


class TypeMismatch(MMCEPError, TypeError):
    pass


# rules

class MissingTracks(MMCEPError):
    pass


class EmptyState(MMCEPError):
    pass


# engine

class DuplicateQueryId(ValidationError):
    pass


class QuerySyntaxError(ValidationError):
    def __init__(self, message, column):
        super().__init__(f"column {column}: {message}")
        self.column = column


# ingest / bench

class ParseError(ValidationError):
    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = line


class OrderingViolation(ValidationError):
    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = line


class InvalidSpec(ValidationError):
    pass


class RangeMismatch(ValidationError):
    pass
