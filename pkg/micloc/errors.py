class MiclocError(Exception):
    """Base class for every error raised by the micloc package."""


class ConfigurationError(MiclocError, ValueError):
    pass


class ConstraintError(MiclocError, ValueError):
    """A position violates the room or ball constraint."""


class DegenerateGeometryError(MiclocError, ValueError):
    pass


class SamplingError(MiclocError):
    pass


class SampleRateMismatchError(MiclocError, ValueError):
    def __init__(self, expected_rate, actual_rate):
        super().__init__(f"Sample rate mismatch: {expected_rate} Hz vs {actual_rate} Hz")
        self.expected_rate = expected_rate
        self.actual_rate = actual_rate


class CalibrationError(MiclocError, ValueError):
    pass


class AudioFormatError(MiclocError):
    def __init__(self, path, msg):
        super().__init__(f"{path}: {msg}")
        self.path = path


class MalformedHeaderError(AudioFormatError):
    pass


class UnsupportedCodecError(AudioFormatError):
    pass


class EmptyAudioError(AudioFormatError):
    pass


class UndefinedRateError(MiclocError, ValueError):
    pass


class AdapterError(MiclocError):
    """The transcriber could not produce a transcript."""

    transport = False


class AdapterExitError(AdapterError):
    def __init__(self, returncode, stderr):
        super().__init__(f"Recognizer exited with status {returncode}: {stderr.strip()[:500]}")
        self.returncode = returncode
        self.stderr = stderr


class AdapterTimeoutError(AdapterError):
    transport = True


class AdapterTransportError(AdapterError):
    transport = True


class AdapterHTTPError(AdapterError):
    def __init__(self, status_code, body):
        super().__init__(f"Recognizer returned HTTP {status_code}: {body.strip()[:500]}")
        self.status_code = status_code
        self.body = body


class TranscriptDecodeError(AdapterError):
    pass


class ResultsFileError(MiclocError):
    pass


class SearchFailedError(MiclocError):
    pass
