from enum import Enum, IntEnum


class MessageType(IntEnum):
    MEASUREMENT_BATCH = 0x01
    CONTROL_BATCH = 0x02
    SETPOINT_BATCH = 0x03
    HELLO = 0x04
    SHUTDOWN = 0x05


class Preset(str, Enum):
    STATIC = "static"
    RESET_PI = "reset_pi"
    QUBE = "qube"


class Command(str, Enum):
    KEYGEN = "keygen"
    SELFTEST = "selftest"
    RUN = "run"
    SERVE_PLANT = "serve-plant"
    SERVE_CONTROLLER = "serve-controller"
    BENCH = "bench"
    EXPORT = "export"


class LoopMode(str, Enum):
    REAL = "real"
    PLAIN_INT = "plain_int"
    ENCRYPTED = "encrypted"


class SetpointMode(str, Enum):
    REMOTE = "remote"
    LOCAL = "local"


class DeadlinePolicy(str, Enum):
    HOLD = "hold"
    WAIT = "wait"


class AccumulationOrder(str, Enum):
    TREE = "tree"
    SEQUENTIAL = "sequential"


class DisturbanceKind(str, Enum):
    IMPULSE = "impulse"
    STEP = "step"


class DisturbanceTarget(str, Enum):
    OUTPUT = "output"
    STATE = "state"
