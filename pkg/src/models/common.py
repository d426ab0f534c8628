"""
Common types used across the application.

Holds the 2-D point alias, the base error class every service error derives
from, and the structured error report printed by the command line.
"""

from datetime import datetime, timezone
from typing import Optional

from pydantic import BaseModel, Field

# (x, y) in meters
Point = tuple[float, float]


class RTIError(Exception):
    """Base error for every imaging, simulation and evaluation failure."""

    def __init__(self, message: str, detail: Optional[str] = None):
        self.message = message
        self.detail = detail
        super().__init__(self.message)


class ErrorReport(BaseModel):
    """Error report emitted on stderr when a command fails."""

    success: bool = False
    error: str
    detail: Optional[str] = None
    code: Optional[str] = None
    exit_code: int = 1
    timestamp: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))
