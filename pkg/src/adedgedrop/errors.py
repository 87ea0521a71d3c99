"""Exception types shared across the package.

The CLI maps these onto exit codes: parse/config problems exit 2, runtime
contract violations exit 3.
"""


class ContractError(ValueError):
    """A caller violated an operation's precondition or invariant."""


class ShapeError(ContractError):
    """Operands have incompatible shapes."""


class ParseError(ValueError):
    """An input file or config could not be parsed.

    Carries the offending location so the CLI can point at it.
    """

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}:" if line is None else f"{path}:{line}:"
        super().__init__(f"{loc} {message}" if loc else message)
        self.path = path
        self.line = line
