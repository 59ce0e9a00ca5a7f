import logging
from typing import TypedDict

from cipherloop.core.exceptions import CodecOverflowError, ConfigurationError
from cipherloop.models.plant import LoopPreset
from cipherloop.services.controller_service import (
    build_controller_spec,
    build_scaling_plan,
    plaintext_bound,
    quantize_design,
)
from cipherloop.services.paillier_service import SUPPORTED_KEY_BITS

logger = logging.getLogger(__name__)


def _validate_sample_period(preset: LoopPreset) -> bool:
    return preset.sample_period_us > 0


def _validate_measurement_map(preset: LoopPreset) -> bool:
    return preset.measurement_map.shape == (preset.design.n_y, preset.plant.n_outputs)


def _validate_setpoint(preset: LoopPreset) -> bool:
    return len(preset.setpoint) == preset.design.n_y


def _validate_actuator(preset: LoopPreset) -> bool:
    return preset.design.n_u == preset.plant.n_inputs and preset.actuator.lo <= preset.actuator.hi


class ValidationResult(TypedDict):
    preset: str
    errors: list[str]
    warnings: list[str]
    valid: bool


class LoopConfigValidator:
    """Checks a loop preset and key size before any key material is touched."""

    STRUCTURE_CHECKS: dict[str, dict[str, object]] = {
        "sample_period_us": {
            "description": "Sampling period",
            "validation": _validate_sample_period,
            "error": "sample_period_us must be positive",
        },
        "measurement_map": {
            "description": "Plant output to controller input map",
            "validation": _validate_measurement_map,
            "error": "measurement map does not match controller inputs and plant outputs",
        },
        "setpoint": {
            "description": "Reference vector",
            "validation": _validate_setpoint,
            "error": "setpoint length differs from the controller input count",
        },
        "actuator": {
            "description": "Controller output to plant input stage",
            "validation": _validate_actuator,
            "error": "controller outputs do not match plant inputs or actuator range is empty",
        },
    }

    RECOMMENDED_MIN_KEY_BITS = 128

    @classmethod
    def validate(
        cls, preset: LoopPreset, key_bits: int, *, check_headroom: bool = True
    ) -> ValidationResult:
        errors: list[str] = []
        warnings: list[str] = []
        design = preset.design

        if key_bits not in SUPPORTED_KEY_BITS:
            errors.append(f"key_bits={key_bits} is not one of {SUPPORTED_KEY_BITS}")
        elif key_bits < cls.RECOMMENDED_MIN_KEY_BITS:
            warnings.append(f"key_bits={key_bits} is for testing only")

        for setting, config in cls.STRUCTURE_CHECKS.items():
            validation_func = config.get("validation")
            if callable(validation_func) and not validation_func(preset):
                errors.append(f"{setting}: {config['error']}")

        try:
            n_prime = design.resolved_n_prime
        except ConfigurationError as e:
            errors.append(str(e))
            return cls._result(preset, errors, warnings)

        if not 0 <= design.m < design.n:
            errors.append(f"codec: need 0 <= m < n, got m={design.m}, n={design.n}")
            return cls._result(preset, errors, warnings)
        if design.n > n_prime:
            errors.append(f"codec: n={design.n} exceeds n'={n_prime}")

        planning = design.model_copy(update={"n_prime": max(n_prime, design.n)})
        try:
            plan = build_scaling_plan(quantize_design(planning), design.signal_exp)
        except ConfigurationError as e:
            errors.append(str(e))
            return cls._result(preset, errors, warnings)

        needed = (design.n - design.m) + plan.max_exp * design.m
        if needed > n_prime:
            errors.append(
                f"scale budget: values reach scale 2^{plan.max_exp * design.m} and need {needed} bits, n'={n_prime}"
            )

        if key_bits in SUPPORTED_KEY_BITS and n_prime >= key_bits - 1:
            errors.append(f"n'={n_prime} leaves no room below a {key_bits}-bit modulus")

        if errors:
            return cls._result(preset, errors, warnings)

        try:
            spec = build_controller_spec(design)
        except CodecOverflowError as e:
            errors.append(f"gain encoding: {e}")
            return cls._result(preset, errors, warnings)

        bound_bits = plaintext_bound(spec).bit_length()
        if bound_bits > key_bits - 1:
            message = (
                f"plaintext headroom: homomorphic sums reach {bound_bits} bits, "
                f"a {key_bits}-bit modulus holds {key_bits - 1}"
            )
            if check_headroom:
                errors.append(message)
            else:
                warnings.append(f"{message} (decrypted values will wrap)")

        return cls._result(preset, errors, warnings)

    @staticmethod
    def _result(preset: LoopPreset, errors: list[str], warnings: list[str]) -> ValidationResult:
        return ValidationResult(
            preset=preset.name, errors=errors, warnings=warnings, valid=len(errors) == 0
        )

    @classmethod
    def validate_or_raise(
        cls, preset: LoopPreset, key_bits: int, *, check_headroom: bool = True
    ) -> ValidationResult:
        result = cls.validate(preset, key_bits, check_headroom=check_headroom)
        for warning in result["warnings"]:
            logger.warning(f"Configuration warning ({preset.name}): {warning}")
        if not result["valid"]:
            raise ConfigurationError("; ".join(result["errors"]))
        return result
