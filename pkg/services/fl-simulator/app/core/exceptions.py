"""Exception types raised by the simulator."""

from typing import List, Optional, Tuple


class SimulatorError(Exception):
    """Base class for simulator errors."""


class ChannelError(SimulatorError, ValueError):
    """Vector length or device count mismatch on a channel operation."""


class BoundError(SimulatorError, ValueError):
    """Step size outside the range where the convergence bound holds."""


class ConfigError(SimulatorError, ValueError):
    """
    Experiment configuration failed validation.

    Carries one (line, key, message) diagnostic per problem so the CLI can
    print them all at once; line is None when the key is missing from the file.
    """

    def __init__(self, diagnostics: List[Tuple[Optional[int], str, str]]):
        self.diagnostics = diagnostics
        super().__init__(self.format())

    def format(self) -> str:
        lines = []
        for line, key, message in self.diagnostics:
            where = f"line {line}" if line is not None else "config"
            lines.append(f"{where}: {key}: {message}")
        return "\n".join(lines)
