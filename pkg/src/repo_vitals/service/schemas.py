"""Request/response models of the badge service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

Label = Literal["active", "unmaintained", "not_analysed"]
Level = Literal["high", "fair", "borderline", "unmaintained", "not_analysed"]
Color = Literal["green", "yellow", "orange", "red", "grey"]

LEVEL_COLORS = {"high": "green", "fair": "yellow", "borderline": "orange", "unmaintained": "red", "not_analysed": "grey"}


class BadgePayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    owner: str
    repo: str
    label: Label
    lma: Optional[float] = Field(default=None, ge=0, le=100)
    level: Level
    color: Color
    p_active: Optional[float] = Field(default=None, ge=0, le=1)
    computed_at: str = Field(pattern=r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z$")
    model_version: str

    @model_validator(mode="after")
    def _consistent(self) -> "BadgePayload":
        if (self.lma is not None) != (self.label == "active"):
            raise ValueError("lma must be present exactly when label is active")
        if LEVEL_COLORS[self.level] != self.color:
            raise ValueError(f"level {self.level} must be {LEVEL_COLORS[self.level]}")
        if self.label == "unmaintained" and self.level != "unmaintained":
            raise ValueError("unmaintained label needs the unmaintained level")
        if self.label == "not_analysed" and self.level != "not_analysed":
            raise ValueError("not_analysed label needs the not_analysed level")
        if self.label == "active" and self.level not in ("high", "fair", "borderline"):
            raise ValueError("active label needs an LMA level")
        return self


class ErrorBody(BaseModel):
    error: str


class Health(BaseModel):
    status: Literal["ok"] = "ok"
    model_loaded: bool
    model_version: Optional[str] = None
    quartiles: Optional[list[float]] = None
