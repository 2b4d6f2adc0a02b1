"""Exception hierarchy.

``DomainError`` subclasses are policy/contract failures (CLI exit 1);
``InfrastructureError`` subclasses are storage or integrity plumbing
failures (CLI exit 3).
"""

from __future__ import annotations


class TrustEngineError(Exception):
    """Base class for every error raised by this package."""


class DomainError(TrustEngineError, ValueError):
    pass


class InfrastructureError(TrustEngineError):
    pass


# integrity
class MalformedManifest(DomainError):
    pass


class DuplicateCode(DomainError):
    pass


class UnknownOwner(DomainError):
    pass


class SystemInstallRequiresValidSignature(DomainError):
    pass


class NotSystemOwned(DomainError):
    pass


class UnknownOriginalOwner(DomainError):
    pass


class DuplicatePrincipal(DomainError):
    pass


# state registry
class UnknownParent(DomainError):
    pass


class ParentNotRunning(DomainError):
    pass


class UnknownPid(DomainError):
    pass


class AlreadyTerminal(DomainError):
    pass


# exec harness
class ParseError(DomainError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no
        self.message = message


class ForkTargetUnknown(DomainError):
    pass


# engine
class UnknownCode(DomainError):
    pass


class UnknownScenario(DomainError):
    pass


# history store
class SequenceGap(InfrastructureError):
    pass


class StorageFailure(InfrastructureError):
    pass


class StoreLocked(StorageFailure):
    pass


class CorruptRecord(InfrastructureError):
    def __init__(self, line_no: int, message: str = "malformed record"):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no
