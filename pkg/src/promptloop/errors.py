"""Exception taxonomy shared by all engine modules."""

from __future__ import annotations


class EngineError(Exception):
    """Base class for every engine-raised error."""


class BackendError(EngineError):
    """A model backend was unreachable or returned malformed output."""

    def __init__(self, message: str, *, capability: str | None = None, cause: str | None = None):
        self.capability = capability
        self.cause = cause
        prefix = f"[{capability}] " if capability else ""
        super().__init__(prefix + message)


class MissingElement(EngineError):
    """A verification report does not cover some prompt element."""


class DanglingElement(EngineError):
    """A verification report references an element the prompt does not have."""


class NeutralFinalLabel(EngineError):
    """A final per-element verdict carries the neutral label."""


class EmptyDecomposition(BackendError):
    """The decomposer returned zero elements."""


class EmptyCaption(BackendError):
    """The captioner returned an empty caption."""


class InvalidLabel(BackendError):
    """An NLI backend returned text outside the three-label set."""


class DegenerateAnswer(BackendError):
    """The prober returned a bare yes/no answer even after a retry."""


class UnverifiedCandidate(EngineError):
    """A candidate without a verification report reached selection."""


class MismatchedElementSets(EngineError):
    """Candidates verified against different element sets were mixed."""


class MissingScalarReward(EngineError):
    """A coverage tie requires reward scores that a candidate lacks."""


class EmptySelection(EngineError):
    """A regeneration plan was requested for an empty selection."""


class UnfaithfulRevision(EngineError):
    """A revised prompt variant drops a required element after retry."""


class BudgetExceeded(EngineError):
    """A generation would push NFE usage past the configured budget."""


class EvenVoteCount(EngineError):
    """Majority voting requires an odd number of annotator votes."""


class CorruptLog(EngineError):
    """The hash chain of an append-only event log does not verify."""


class ProfileError(EngineError):
    """A backend profile is incomplete or inconsistent."""
