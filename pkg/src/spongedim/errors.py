"""Exception hierarchy shared by the library and the CLI."""


class SpongeError(Exception):
    """Base class for all errors raised by :mod:`spongedim`."""


class ModelError(SpongeError, ValueError):
    """Invalid model description (alphabets, factor maps, gamma, cell law)."""


class DegenerateError(SpongeError):
    """A computation requires a non-degenerate input and did not get one.

    Raised for subcritical/critical branching (``E(#A) <= 1``), degenerate
    Mandelbrot weight laws (``T'(1) <= 0``), trivial top levels handed to a
    pressure curve, and similar contract violations.
    """


class ContractError(SpongeError):
    """A documented pre- or postcondition was violated at run time."""


class BudgetExceeded(SpongeError):
    """Simulation node budget was exhausted before any usable depth."""
