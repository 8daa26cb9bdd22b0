"""Exception hierarchy shared by all modules."""


class RecourseError(Exception):
    """Base class for domain errors (CLI exit code 1)."""


class CyclicGraph(RecourseError):
    pass


class DanglingParent(RecourseError):
    pass


class EquationArityMismatch(RecourseError):
    pass


class SchemaMismatch(RecourseError):
    pass


class SoftOnCategorical(RecourseError):
    pass


class SingularDesign(RecourseError):
    pass


class EmptyDataset(RecourseError):
    pass


class DegenerateLabels(RecourseError):
    pass


class MissingRange(RecourseError):
    pass


class IndexOutOfSchema(RecourseError):
    pass


class ProblemTooLarge(RecourseError):
    pass


class MissingColumns(RecourseError):
    pass


class FormatError(RecourseError):
    """Malformed spec, action or dataset file."""


class NoSolutionInGrid(RecourseError):
    """No grid point satisfies all constraints and flips the classifier.

    ``best_gap`` is how far the best feasible candidate's decision score fell
    short of the favorable side (``inf`` if no candidate was feasible at all).
    """

    def __init__(self, message, best_gap=float("inf"), nodes_explored=0):
        super().__init__(message)
        self.best_gap = best_gap
        self.nodes_explored = nodes_explored
