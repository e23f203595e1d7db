"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class StableRankError(Exception):
    exit_code = 2


class ConfigError(StableRankError, ValueError):
    exit_code = 1


class DataError(StableRankError, ValueError):
    exit_code = 2


class ParseError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateInteractionError(ParseError):
    pass


class ResolutionError(ParseError):
    """An identifier in an input file is not known to the dataset."""


class MaskViolationError(ParseError):
    """A score was supplied for a (user, item) pair from the training set."""


class InfeasibleError(StableRankError):
    exit_code = 3


class InfeasibleCapacityError(InfeasibleError):
    def __init__(self, total_capacity, required, n_users=None, n_items=None, k=None):
        self.total_capacity = total_capacity
        self.required = required
        msg = f"total item capacity {total_capacity} < |users| * k = {required}"
        if n_users and n_items and k:
            msg += (
                f"; a uniform cap cannot be smaller (lower bound) than "
                f"|users| * k / |items| = {n_users * k / n_items:.4g}"
            )
        super().__init__(msg)


class ShortPreferenceListError(InfeasibleError):
    def __init__(self, user, length, k):
        self.user = user
        self.length = length
        super().__init__(f"user {user} has {length} ranked items, fewer than k={k}")


class ExhaustedPreferencesError(InfeasibleError):
    def __init__(self, user, shortfall):
        self.user = user
        self.shortfall = shortfall
        super().__init__(
            f"user {user} exhausted its preference list {shortfall} slot(s) short"
        )


class EnumerationGuardError(StableRankError):
    exit_code = 1
