"""Exception types.  Everything a caller may want to catch derives from DcstegError."""


class DcstegError(Exception):
    pass


class FrameError(DcstegError, ValueError):
    """Unreadable or inconsistent video input."""


class AttackError(DcstegError, ValueError):
    """Invalid attack specification or parameters."""


class IndexFormatError(DcstegError):
    """Corrupt, truncated or incompatible index file."""


class NotFoundError(DcstegError, KeyError):
    """No carrier block has the requested hash value."""

    def __init__(self, pattern: str):
        super().__init__(pattern)
        self.pattern = pattern

    def __str__(self) -> str:
        return f"no carrier for segment {self.pattern}"


class MissingVideoError(DcstegError):
    """A payload refers to a video (or frame) the receiver does not have."""


class PayloadError(DcstegError):
    """Malformed auxiliary payload."""


class PayloadAuthError(PayloadError):
    def __init__(self, msg: str = "payload authentication failed"):
        super().__init__(msg)
