"""Exception types shared across the package."""


class FormulaSyntaxError(ValueError):
    """Bad formula source text; carries the character position."""

    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UndeclaredInput(ValueError):
    def __init__(self, name):
        super().__init__(f"input '{name}' used but never declared")
        self.name = name


class DimensionMismatch(ValueError):
    def __init__(self, path, message):
        super().__init__(f"{message} (gate path {path})")
        self.path = path


class NonSquareInversion(ValueError):
    def __init__(self, path, shape):
        super().__init__(f"inversion of non-square {shape[0]}x{shape[1]} matrix (gate path {path})")
        self.path = path
        self.shape = shape


class UnknownLeaf(KeyError):
    pass


class NonSquareOutput(ValueError):
    pass


class SingularMatrix(ArithmeticError):
    """A matrix that must be inverted has a pivot below the singularity tolerance."""


class SingularInversion(SingularMatrix):
    """An inversion gate met a singular argument; carries the gate path."""

    def __init__(self, path):
        super().__init__(f"inversion gate at path {path} applied to a singular matrix")
        self.path = path


class SingularUpdate(ArithmeticError):
    """An update would make the tracked matrix singular; state is unchanged."""


class ZeroDeterminant(ArithmeticError):
    """Signal: the determinant-lemma factor is exactly zero; state is unchanged."""


class ZeroInverse(ZeroDivisionError):
    """Multiplicative inverse of zero requested in a prime field."""


class EmptyUndoLog(LookupError):
    pass


class InvalidVertex(ValueError):
    pass


class TooLarge(ValueError):
    pass


class ConfigError(ValueError):
    pass
