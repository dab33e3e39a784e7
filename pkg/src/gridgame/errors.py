"""Exception hierarchy shared by every subpackage."""


class GridGameError(Exception):
    """Base class for all errors raised by gridgame."""


# --- data / topology -------------------------------------------------------

class DataError(GridGameError):
    """Input data could not be turned into a valid model."""


class MalformedCase(DataError):
    pass


class ZeroReactance(MalformedCase):
    pass


class InconsistentTopology(DataError):
    pass


class InvalidCoherency(DataError):
    pass


class UnknownLine(DataError, KeyError):
    pass


class UnknownSubstation(DataError, KeyError):
    pass


class SingularSystem(GridGameError):
    pass


class ImbalancedCase(DataError):
    pass


# --- solver ----------------------------------------------------------------

class SolverError(GridGameError):
    """A solve ended in a status the caller cannot continue from."""


class DuplicateVariableName(SolverError, ValueError):
    pass


class UnknownVariableInTerm(SolverError, ValueError):
    pass


class NumericalError(SolverError):
    """The simplex lost numerical control (singular basis, failed certificate)."""


class InfeasiblePartition(SolverError):
    """No proper islanding exists for the given adversary action."""


class DegenerateGame(GridGameError, ValueError):
    pass


class NonConvergence(GridGameError, RuntimeWarning):
    """The double-oracle loop hit its iteration cap (issued as a warning)."""
