from fastapi import HTTPException, status


class RirDenoiseError(Exception):
    """Base class for every error raised by rirdenoise."""


class InputError(RirDenoiseError, ValueError):
    """The caller supplied something unusable (CLI exit status 2)."""


class ProcessingError(RirDenoiseError):
    """A numerical stage failed on otherwise valid input (CLI exit status 3)."""


class SignalLengthError(InputError):
    pass


class WaveletLevelError(InputError):
    pass


class FilterBankError(InputError):
    pass


class AudioFormatError(InputError):
    pass


class PlanError(InputError):
    pass


class WaveletStructureError(ProcessingError):
    pass


class EnvelopeFitError(ProcessingError):
    pass


class NoTransitionError(ProcessingError):
    pass


class InsufficientDecayError(ProcessingError):
    pass


class SparseCodingError(ProcessingError):
    pass


def not_found(detail: str = "Resource not found") -> HTTPException:
    return HTTPException(status_code=status.HTTP_404_NOT_FOUND, detail=detail)


def bad_request(detail: str = "Bad request") -> HTTPException:
    return HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=detail)


def unprocessable(detail: str = "Unprocessable input") -> HTTPException:
    return HTTPException(status_code=422, detail=detail)
