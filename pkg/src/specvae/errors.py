"""Exception types. The CLI maps ValidationError to exit code 2 and NumericalError to 3."""


class SpecVAEError(Exception):
    pass


class ValidationError(SpecVAEError, ValueError):
    pass


class MeshParseError(ValidationError):
    def __init__(self, message, line=None, path=None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)
        self.line = line
        self.path = path


class NumericalError(SpecVAEError, ArithmeticError):
    pass
