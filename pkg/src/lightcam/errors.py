"""Exception types shared across the package."""


class LightCamError(Exception):
    """Base class for all domain errors raised by lightcam."""


class WavReadError(LightCamError):
    """Rejected WAV input. ``reason`` is a stable machine-checkable code."""

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        super().__init__(f"{reason}: {detail}" if detail else reason)


class UtteranceTooShortError(LightCamError):
    """Fewer samples than one analysis window (400 samples at 16 kHz)."""


class WeightFormatError(LightCamError):
    """Rejected weight file. ``reason`` is a stable machine-checkable code."""

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        super().__init__(f"{reason}: {detail}" if detail else reason)


class ConfigError(LightCamError):
    """Model configuration deviates from the pinned architecture constants."""


class ExtractionError(LightCamError):
    """Failure while embedding one utterance; carries the utterance id."""

    def __init__(self, utterance: str, cause: Exception):
        self.utterance = utterance
        super().__init__(f"{utterance}: {cause}")
