import logging
from collections.abc import Iterable

from cipherloop.models.enums import DeadlinePolicy, SetpointMode
from cipherloop.models.keys import PrivateKey, PublicKey
from cipherloop.models.plant import LoopPreset
from cipherloop.schemas.wire import SessionParams
from cipherloop.services.controller_endpoint import ControllerEndpoint
from cipherloop.services.controller_service import build_controller_spec, encode_signals
from cipherloop.services.loop_service import LoopResult
from cipherloop.services.plant_interface import PlantInterfaceService

logger = logging.getLogger(__name__)

LOOPBACK_HOST = "127.0.0.1"


def controller_for_preset(
    preset: LoopPreset,
    pk: PublicKey,
    setpoint_mode: SetpointMode = SetpointMode.LOCAL,
    drop_steps: Iterable[int] = (),
) -> ControllerEndpoint:
    spec = build_controller_spec(preset.design)
    params = SessionParams.for_session(spec, pk, preset.sample_period_us, setpoint_mode)
    residues, _ = encode_signals(spec, preset.setpoint)
    return ControllerEndpoint(
        spec, pk, params, setpoint_residues=residues, drop_steps=drop_steps
    )


async def run_loopback_session(
    preset: LoopPreset,
    pk: PublicKey,
    sk: PrivateKey,
    steps: int,
    *,
    seed: int | None = None,
    setpoint_mode: SetpointMode = SetpointMode.LOCAL,
    deadline_policy: DeadlinePolicy = DeadlinePolicy.WAIT,
    overlap_randomizer: bool = True,
    controller: ControllerEndpoint | None = None,
) -> LoopResult:
    """Both services in one event loop, talking over a loopback socket."""
    endpoint = controller or controller_for_preset(preset, pk, setpoint_mode)
    host, port = await endpoint.start(LOOPBACK_HOST, 0, sessions=1)
    plant = PlantInterfaceService(
        preset,
        pk,
        sk,
        seed=seed,
        setpoint_mode=setpoint_mode,
        deadline_policy=deadline_policy,
        overlap_randomizer=overlap_randomizer,
    )
    try:
        return await plant.run(host, port, steps)
    finally:
        await endpoint.stop()
