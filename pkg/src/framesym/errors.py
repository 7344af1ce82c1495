"""Exception and warning types shared across the package."""

from __future__ import annotations


class FrameSymError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(FrameSymError):
    """Malformed expression source.

    ``position`` is the 0-based character offset of the offending token.
    """

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at offset {position})")
        self.message = message
        self.position = position


class UnknownIdentifier(ParseError):
    """An identifier that is neither a declared coordinate nor a known function."""

    def __init__(self, name: str, position: int):
        super().__init__(f"unknown identifier '{name}'", position)
        self.name = name


class DomainError(FrameSymError):
    """Evaluation left the domain of an elementary function (log/sqrt/...)."""


class DimensionMismatch(FrameSymError):
    """Operands do not share the required dimension or truncation order."""


class OrderUnderflow(FrameSymError):
    """A derivative was requested from an order-0 jet."""


class OrderOverflow(FrameSymError):
    """A derivative order beyond the configured jet budget was requested."""


class DegenerateFrame(FrameSymError):
    """The frame matrix is numerically singular at the queried point."""

    def __init__(self, point, det=None):
        msg = f"frame degenerate at {tuple(float(c) for c in point)}"
        if det is not None:
            msg += f" (|det| = {abs(det):.3e})"
        super().__init__(msg)
        self.point = point
        self.det = det


class StabilizationNotFound(FrameSymError):
    """Kernel dimensions kept strictly decreasing through the probed orders.

    Cannot happen for max order >= n+2; signals the caller requested too few
    orders (or a numerical breakdown).
    """


class DomainExit(FrameSymError):
    """An integrated trajectory left the declared domain box."""

    def __init__(self, t: float, point):
        super().__init__(
            f"trajectory left the domain box at t = {t:.6g}, "
            f"x = {tuple(float(c) for c in point)}"
        )
        self.t = t
        self.point = point


class PreconditionViolated(FrameSymError):
    """A documented precondition of a verification routine failed."""


class InsufficientSamples(FrameSymError):
    """A sampled field cannot supply the stencil needed for verification."""


class ConfigError(FrameSymError):
    """Invalid run configuration file."""

    def __init__(self, section: str, key: str, message: str, line: int | None = None):
        loc = f"[{section}] {key}" if key else f"[{section}]"
        if line is not None:
            loc += f" (line {line})"
        super().__init__(f"{loc}: {message}")
        self.section = section
        self.key = key
        self.line = line


class GeneratorResidualWarning(UserWarning):
    """Transported generator drifted out of its kernel beyond tolerance."""
