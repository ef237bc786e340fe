"""Exception hierarchy shared across the package."""


class MultilocError(Exception):
    """Base class for every error raised by this package."""


class CodecError(MultilocError, ValueError):
    pass


class CodePointOverflow(CodecError):
    """A character does not fit in the configured character width."""


class IllegalDerivation(CodecError):
    """A production sequence is not a legal leftmost derivation."""


class NonZeroPadding(CodecError):
    """The trailing pad bits implied by a derivation are not all zero."""


class GrammarError(MultilocError, ValueError):
    """A grammar violates the quadruple invariants."""


class TransformError(MultilocError, ValueError):
    pass


class DomainTooSmall(TransformError):
    pass


class DomainMismatch(TransformError):
    pass


class ShareMismatch(MultilocError, ValueError):
    """Two shares cannot be recombined (tag, length or role disagreement)."""


class EnvelopeError(MultilocError):
    pass


class UnknownKey(EnvelopeError, KeyError):
    pass


class WrongKey(EnvelopeError):
    pass


class NotCiphertext(EnvelopeError, TypeError):
    pass


class ConfigError(MultilocError, ValueError):
    """Scenario or network configuration is invalid."""
