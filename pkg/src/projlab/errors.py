"""Exception types shared across the construction pipeline."""


class ProjLabError(Exception):
    """Base class for all construction errors."""


class RankDeficient(ProjLabError):
    """Input vectors are not linearly independent at working tolerance."""


class NotSymmetric(ProjLabError):
    pass


class NotContraction(ProjLabError):
    pass


class NotOrthonormalPair(ProjLabError):
    pass


class NotUnitary(ProjLabError):
    pass


class MissingHelpers(ProjLabError):
    """Too few tilt-partner vectors supplied for an interpolation build."""


class Infeasible(ProjLabError):
    """No exponent below the scan cap satisfies a power-schedule bound."""

    def __init__(self, stage, message=""):
        self.stage = stage
        super().__init__(message or f"no admissible exponent for stage {stage}")


class InsufficientStages(ProjLabError):
    """A ratchet flag is too short for the requested accuracy."""

    def __init__(self, required, message=""):
        self.required = required
        super().__init__(message or f"flag too short; need about {required} unit drops")


class BudgetExceeded(ProjLabError):
    """A dimension or size budget was exceeded."""


class OrderingViolation(ProjLabError):
    """An assembled chain of projections is not decreasing as declared."""


class HypothesisViolated(ProjLabError):
    """A transport-identity premise failed; carries the failing premise name."""

    def __init__(self, premise, measured=None, limit=None):
        self.premise = premise
        self.measured = measured
        self.limit = limit
        detail = f"premise failed: {premise}"
        if measured is not None:
            detail += f" (measured {measured:.3e}, limit {limit:.3e})"
        super().__init__(detail)


class CertificateFailed(ProjLabError):
    """A stage certificate missed its bound."""

    def __init__(self, stage, message=""):
        self.stage = stage
        super().__init__(message or f"certificate failed at stage {stage}")


class WordTooLong(ProjLabError):
    """Flattening a word would exceed the letter cap."""

    def __init__(self, letters, cap):
        self.letters = letters
        self.cap = cap
        if letters < 10**18:
            size = str(letters)
        else:
            size = f"~1e{letters.bit_length() * 30103 // 100000}"
        super().__init__(f"word needs {size} letters, cap is {cap}")


class ConfigError(ProjLabError):
    """Invalid experiment configuration; carries per-field diagnostics."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
