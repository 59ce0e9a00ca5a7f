class CipherloopError(Exception):
    pass


class ParameterError(CipherloopError, ValueError):
    pass


class KeyGenerationError(CipherloopError):
    pass


class KeyMismatchError(CipherloopError):
    pass


class KeyFileError(CipherloopError):
    pass


class CodecError(CipherloopError, ValueError):
    pass


class CodecOverflowError(CodecError):
    pass


class ConfigurationError(CipherloopError):
    pass


class WireProtocolError(CipherloopError):
    pass


class SessionRefusedError(CipherloopError):
    pass
