"""
Error hierarchy for the maskworld pipeline.

Every error carries a machine-parsable code (the class name) that the
command line prints as ``error: <Code>: <message>``. Errors raised while
converting an action sequence can be tagged with the offending step.
"""

from typing import Optional, Tuple


class MaskWorldError(Exception):
    """Base class for all pipeline errors."""

    def __init__(self, message: str = ""):
        super().__init__(message)
        self.step: Optional[int] = None

    @property
    def code(self) -> str:
        return type(self).__name__

    def at_step(self, step: int) -> "MaskWorldError":
        """Attach the action-sequence step index and return self for re-raising."""
        self.step = step
        return self

    def __str__(self) -> str:
        message = super().__str__()
        if self.step is not None:
            return f"step {self.step}: {message}"
        return message


class ShapeError(MaskWorldError, ValueError):
    """Array shapes or divisibility contracts violated."""


class ConfigError(MaskWorldError, ValueError):
    """Invalid or unknown configuration."""


class KTooLarge(MaskWorldError, ValueError):
    """Dynamics window K is not smaller than the latent length."""


class InvalidAction(MaskWorldError, ValueError):
    """Malformed manipulator action or action sequence."""


# URDF parsing

class MalformedXml(MaskWorldError):
    """Document is not well-formed XML or has no <robot> root."""


class MalformedUrdf(MaskWorldError):
    """Document is XML but violates the supported URDF subset."""


class CyclicJointGraph(MaskWorldError):
    """Joint graph contains a cycle."""


class UnsupportedGeometry(MaskWorldError):
    """Geometry other than box, cylinder or sphere."""


class MissingLink(MaskWorldError):
    """A joint or gripper references an undeclared link."""

    def __init__(self, name: str):
        super().__init__(f"link '{name}' is not declared")
        self.name = name


# Kinematics

class JointLimitViolation(MaskWorldError):
    """A joint value lies outside its limits."""

    def __init__(self, index: int, value: float, limits: Tuple[float, float]):
        super().__init__(
            f"joint {index} value {value:.6g} outside [{limits[0]:.6g}, {limits[1]:.6g}]"
        )
        self.index = index
        self.value = value
        self.limits = limits


class DidNotConverge(MaskWorldError):
    """Inverse kinematics exhausted its iteration budget."""

    def __init__(self, best_error: float, iterations: int):
        super().__init__(
            f"inverse kinematics did not converge after {iterations} iterations "
            f"(best error {best_error:.3g})"
        )
        self.best_error = best_error
        self.iterations = iterations


class UnreachableTarget(MaskWorldError):
    """Target lies beyond the chain's reach."""

    def __init__(self, distance: float, reach: float):
        super().__init__(f"target at {distance:.4g} m exceeds reach {reach:.4g} m")
        self.distance = distance
        self.reach = reach


# Pipeline

class SceneSamplingFailed(MaskWorldError):
    """No valid scene was found within the retry budget."""

    def __init__(self, attempts: int, reason: str = ""):
        super().__init__(f"scene sampling failed after {attempts} attempts {reason}".strip())
        self.attempts = attempts


class NonFiniteLoss(MaskWorldError):
    """A loss term became NaN or infinite."""

    def __init__(self, epoch: Optional[int] = None, step: Optional[int] = None, detail: str = ""):
        where = f"epoch {epoch}, step {step}" if epoch is not None else "evaluation"
        super().__init__(f"non-finite loss at {where} {detail}".strip())
        self.epoch = epoch
        self.batch_step = step


class InfeasiblePlan(MaskWorldError):
    """Every CEM candidate failed to roll out."""


class TooFewPolicies(MaskWorldError):
    """Ranking metrics need at least two policies."""


class ZeroVariance(MaskWorldError):
    """Correlation undefined for a constant column."""


class OutputLocked(MaskWorldError):
    """Another run holds the output directory lock."""
