class OpIdealError(Exception):
    pass


class StructuralError(OpIdealError):
    pass


class SpaceMismatchError(StructuralError):
    def __init__(self, expected, actual, *args):
        self.expected = expected
        self.actual = actual
        super().__init__(*args)

    def __str__(self):
        return f"space mismatch: expected {self.expected}, got {self.actual}"


class DualityError(OpIdealError):
    pass


class HypothesisError(OpIdealError):
    """A lemma precondition could not be certified; the computation is refused."""

    def __init__(self, message: str, hint=None):
        self.hint = hint
        super().__init__(message)

    def __str__(self):
        message = super().__str__()
        if self.hint is None:
            return message
        return f"{message} (hint: {self.hint})"


class SamplingExhausted(OpIdealError):
    def __init__(self, tries: int, best_energy: float, *args):
        self.tries = tries
        self.best_energy = best_energy
        super().__init__(*args)

    def __str__(self):
        return f"no admissible subset after {self.tries} tries, best gram energy {self.best_energy:.6g}"


class NetBudgetError(OpIdealError):
    def __init__(self, required_rows: int, budget: int, *args):
        self.required_rows = required_rows
        self.budget = budget
        super().__init__(*args)

    def __str__(self):
        return f"net needs {self.required_rows} rows, budget is {self.budget}"


class LPInfeasibleError(OpIdealError):
    def __init__(self, row: int, status: str, *args):
        self.row = row
        self.status = status
        super().__init__(*args)

    def __str__(self):
        return f"linear program for row {self.row} failed: {self.status}"


class ConfigError(OpIdealError):
    pass
