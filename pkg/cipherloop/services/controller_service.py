"""The resetting linear controller as real-valued, integer and encrypted recursions."""

import logging
from collections.abc import Sequence
from fractions import Fraction
from graphlib import CycleError, TopologicalSorter

import numpy as np

from cipherloop.core.exceptions import ConfigurationError, ParameterError
from cipherloop.models.codec import EncodedInt, Fixed
from cipherloop.models.controller import (
    ControllerSpec,
    EncState,
    FixedMatrix,
    IntMatrix,
    IntStep,
    PlainIntState,
    QuantizedController,
    ScalingPlan,
)
from cipherloop.models.enums import AccumulationOrder
from cipherloop.models.keys import Ciphertext, PrivateKey, PublicKey, RandomizerPower
from cipherloop.schemas.codec import FixedSpec
from cipherloop.schemas.controller import ControllerDesign
from cipherloop.services.codec_service import (
    decode,
    encode_value,
    quantize_vector,
    to_signed,
)
from cipherloop.services.paillier_service import (
    decrypt,
    encrypt,
    encrypt_deterministic,
    encrypt_zero_unit,
    hom_add,
    hom_scale,
)

logger = logging.getLogger(__name__)


def _quantize_matrix(codec: FixedSpec, rows: list[list[float]]) -> tuple[FixedMatrix, int]:
    matrix: list[tuple[Fixed, ...]] = []
    saturated = 0
    for row in rows:
        values, count = quantize_vector(codec, row)
        matrix.append(tuple(values))
        saturated += count
    return tuple(matrix), saturated


def quantize_design(design: ControllerDesign) -> QuantizedController:
    codec = design.codec
    a_bar, sat_a = _quantize_matrix(codec, design.A)
    b_bar, sat_b = _quantize_matrix(codec, design.B)
    c_bar, sat_c = _quantize_matrix(codec, design.C)

    saturated = sat_a + sat_b + sat_c
    if saturated:
        logger.warning(f"Controller {design.name}: {saturated} gain entries saturated in Q({codec.n},{codec.m})")

    return QuantizedController(
        a_bar=a_bar, b_bar=b_bar, c_bar=c_bar, T=design.T, saturated_gains=saturated
    )


def _fraction_exp(f: Fixed) -> int:
    return 0 if f.value.denominator == 1 else 1


def build_scaling_plan(q: QuantizedController, signal_exp: int) -> ScalingPlan:
    if q.T is not None:
        return ScalingPlan(T=q.T, signal_exp=signal_exp)

    deps = {i: [j for j in range(q.n_x) if q.a_bar[i][j].k != 0] for i in range(q.n_x)}
    try:
        order = list(TopologicalSorter(deps).static_order())
    except CycleError as e:
        raise ConfigurationError(
            "T=inf needs a state matrix without feedback cycles; set a finite reset period"
        ) from e

    state_exps = [signal_exp] * q.n_x
    for i in order:
        candidates = [state_exps[j] + _fraction_exp(q.a_bar[i][j]) for j in deps[i]]
        candidates += [signal_exp + _fraction_exp(b) for b in q.b_bar[i] if b.k != 0]
        state_exps[i] = max(candidates, default=signal_exp)

    output_exps = [
        max(
            (state_exps[j] + _fraction_exp(c) for j, c in enumerate(row) if c.k != 0),
            default=0,
        )
        for row in q.c_bar
    ]

    return ScalingPlan(
        T=None,
        signal_exp=signal_exp,
        state_exps=tuple(state_exps),
        output_exps=tuple(output_exps),
        a_exps=tuple(
            tuple(state_exps[i] - state_exps[j] if q.a_bar[i][j].k else 0 for j in range(q.n_x))
            for i in range(q.n_x)
        ),
        b_row_exps=tuple(exp - signal_exp for exp in state_exps),
        c_exps=tuple(
            tuple(output_exps[i] - state_exps[j] if c.k else 0 for j, c in enumerate(row))
            for i, row in enumerate(q.c_bar)
        ),
    )


def build_controller_spec(design: ControllerDesign) -> ControllerSpec:
    codec = design.codec
    q = quantize_design(design)
    plan = build_scaling_plan(q, design.signal_exp)

    def residue(f: Fixed, exp: int) -> int:
        return encode_value(codec, f.value, exp).residue

    a_hat = tuple(
        tuple(residue(a, plan.a_exp(i, j)) for j, a in enumerate(row))
        for i, row in enumerate(q.a_bar)
    )
    c_hat = tuple(
        tuple(residue(c, plan.c_exp(i, j)) for j, c in enumerate(row))
        for i, row in enumerate(q.c_bar)
    )
    phases = 1 if design.T is None else design.T
    b_hat_seq = tuple(
        tuple(
            tuple(residue(b, plan.b_exp(phase, i)) for b in row)
            for i, row in enumerate(q.b_bar)
        )
        for phase in range(phases)
    )

    return ControllerSpec(
        name=design.name,
        a_hat=a_hat,
        b_hat_seq=b_hat_seq,
        c_hat=c_hat,
        T=design.T,
        codec=codec,
        plan=plan,
    )


def plaintext_bound(spec: ControllerSpec) -> int:
    """Largest integer any homomorphic sum can hold, from the public gain residues."""
    signal = spec.codec.modulus - 1
    error = signal * signal + signal
    worst = error

    def output_bound(x: Sequence[int]) -> int:
        return max((sum(c * xj for c, xj in zip(row, x)) for row in spec.c_hat), default=0)

    x = [0] * spec.n_x
    updates = spec.T - 1 if spec.T is not None else spec.n_x
    for phase in range(updates):
        b_hat = spec.b_hat_seq[phase % len(spec.b_hat_seq)]
        x = [
            sum(a * xj for a, xj in zip(spec.a_hat[i], x)) + sum(b_hat[i]) * error
            for i in range(spec.n_x)
        ]
        worst = max(worst, max(x), output_bound(x))
    return worst


def initial_int_state(spec: ControllerSpec) -> PlainIntState:
    return PlainIntState(x_hat=(0,) * spec.n_x, k=0)


def initial_enc_state(spec: ControllerSpec, pk: PublicKey) -> EncState:
    return EncState(x_tilde=tuple(encrypt_zero_unit(pk) for _ in range(spec.n_x)), k=0)


def _check_length(name: str, values: Sequence[object], expected: int) -> None:
    if len(values) != expected:
        raise ParameterError(f"{name} has {len(values)} entries, expected {expected}")


def reference_step(
    design: ControllerDesign,
    x: Sequence[float] | np.ndarray,
    s: Sequence[float] | np.ndarray,
    y: Sequence[float] | np.ndarray,
    k: int,
) -> tuple[np.ndarray, np.ndarray]:
    A, B, C = design.matrices()
    x_vec = np.asarray(x, dtype=float)
    s_vec = np.asarray(s, dtype=float)
    y_vec = np.asarray(y, dtype=float)
    if x_vec.shape != (design.n_x,) or s_vec.shape != (design.n_y,) or y_vec.shape != (design.n_y,):
        raise ParameterError(
            f"Expected x of length {design.n_x} and s, y of length {design.n_y}"
        )

    u = C @ x_vec
    if design.T is not None and (k + 1) % design.T == 0:
        return np.zeros(design.n_x), u
    return A @ x_vec + B @ (s_vec - y_vec), u


def _matvec(matrix: IntMatrix, vector: Sequence[int]) -> list[int]:
    return [sum(a * v for a, v in zip(row, vector)) for row in matrix]


def int_reference_step(
    spec: ControllerSpec,
    st: PlainIntState,
    s_hat: Sequence[int],
    y_hat: Sequence[int],
) -> IntStep:
    _check_length("s_hat", s_hat, spec.n_y)
    _check_length("y_hat", y_hat, spec.n_y)
    _check_length("state", st.x_hat, spec.n_x)

    codec = spec.codec
    modulus = codec.modulus
    half_range = modulus >> 1

    def signed(values: Sequence[int]) -> list[int]:
        return [to_signed(codec, v % modulus) for v in values]

    def overflows(values: Sequence[int]) -> bool:
        return any(not -half_range <= v < half_range for v in values)

    x_signed = signed(st.x_hat)
    u_exact = _matvec(tuple(tuple(signed(row)) for row in spec.c_hat), x_signed)
    overflow = overflows(u_exact)
    u_hat = tuple(v % modulus for v in u_exact)

    if spec.resets_after(st.k):
        return IntStep(PlainIntState(x_hat=(0,) * spec.n_x, k=st.k + 1), u_hat, overflow)

    e_exact = [s - y for s, y in zip(signed(s_hat), signed(y_hat))]
    overflow = overflow or overflows(e_exact)

    a_signed = tuple(tuple(signed(row)) for row in spec.a_hat)
    b_signed = tuple(tuple(signed(row)) for row in spec.b_hat(st.k))
    x_exact = [
        ax + be
        for ax, be in zip(_matvec(a_signed, x_signed), _matvec(b_signed, e_exact))
    ]
    overflow = overflow or overflows(x_exact)

    if overflow:
        logger.debug(f"Integer controller wraps modulo 2^{codec.n_prime} at step {st.k}")

    next_state = PlainIntState(x_hat=tuple(v % modulus for v in x_exact), k=st.k + 1)
    return IntStep(next_state, u_hat, overflow)


def decode_state(spec: ControllerSpec, st: PlainIntState) -> list[Fraction]:
    return [
        decode(spec.codec, EncodedInt(residue=x, scale_exp=spec.plan.state_exp(st.k, i)))
        for i, x in enumerate(st.x_hat)
    ]


def decode_outputs(spec: ControllerSpec, u_hat: Sequence[int], k: int) -> list[float]:
    return [
        float(decode(spec.codec, EncodedInt(residue=u, scale_exp=spec.plan.output_exp(k, i))))
        for i, u in enumerate(u_hat)
    ]


def encode_signals(spec: ControllerSpec, values: Sequence[float]) -> tuple[list[int], int]:
    """Quantize and embed setpoints or measurements; returns residues and saturation count."""
    _check_length("signal", values, spec.n_y)
    fixed, saturated = quantize_vector(spec.codec, values)
    residues = [encode_value(spec.codec, f.value, spec.plan.signal_exp).residue for f in fixed]
    return residues, saturated


def encrypt_signals(
    pk: PublicKey, residues: Sequence[int], randomizers: Sequence[RandomizerPower] | None
) -> tuple[Ciphertext, ...]:
    if randomizers is None:
        return tuple(encrypt_deterministic(pk, t) for t in residues)
    _check_length("randomizers", randomizers, len(residues))
    return tuple(encrypt(pk, t, z) for t, z in zip(residues, randomizers))


def _accumulate(pk: PublicKey, terms: list[Ciphertext], order: AccumulationOrder) -> Ciphertext:
    if not terms:
        return encrypt_zero_unit(pk)

    if order is AccumulationOrder.SEQUENTIAL:
        total = terms[0]
        for term in terms[1:]:
            total = hom_add(pk, total, term)
        return total

    level = terms
    while len(level) > 1:
        paired = [hom_add(pk, level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            paired.append(level[-1])
        level = paired
    return level[0]


def _scaled_terms(
    pk: PublicKey,
    gains: Sequence[int],
    ciphertexts: Sequence[Ciphertext],
    bits: int,
    skip_zero_gains: bool,
) -> list[Ciphertext]:
    return [
        hom_scale(pk, gain, c, bits)
        for gain, c in zip(gains, ciphertexts)
        if gain or not skip_zero_gains
    ]


def encrypted_generate_control(
    spec: ControllerSpec,
    pk: PublicKey,
    st: EncState,
    *,
    order: AccumulationOrder = AccumulationOrder.TREE,
    skip_zero_gains: bool = False,
) -> tuple[Ciphertext, ...]:
    _check_length("state", st.x_tilde, spec.n_x)
    bits = spec.codec.n_prime
    return tuple(
        _accumulate(pk, _scaled_terms(pk, row, st.x_tilde, bits, skip_zero_gains), order)
        for row in spec.c_hat
    )


def encrypted_update_state(
    spec: ControllerSpec,
    pk: PublicKey,
    st: EncState,
    s_tilde: Sequence[Ciphertext],
    y_tilde: Sequence[Ciphertext],
    *,
    order: AccumulationOrder = AccumulationOrder.TREE,
    skip_zero_gains: bool = False,
) -> EncState:
    _check_length("s_tilde", s_tilde, spec.n_y)
    _check_length("y_tilde", y_tilde, spec.n_y)
    _check_length("state", st.x_tilde, spec.n_x)

    if spec.resets_after(st.k):
        return EncState(x_tilde=tuple(encrypt_zero_unit(pk) for _ in range(spec.n_x)), k=st.k + 1)

    bits = spec.codec.n_prime
    negate = spec.codec.modulus - 1
    # (2^n' - 1) * y + s == s - y (mod 2^n')
    e_tilde = [
        hom_add(pk, hom_scale(pk, negate, y, bits), s) for s, y in zip(s_tilde, y_tilde)
    ]

    b_hat = spec.b_hat(st.k)
    x_next = tuple(
        _accumulate(
            pk,
            _scaled_terms(pk, spec.a_hat[i], st.x_tilde, bits, skip_zero_gains)
            + _scaled_terms(pk, b_hat[i], e_tilde, bits, skip_zero_gains),
            order,
        )
        for i in range(spec.n_x)
    )
    return EncState(x_tilde=x_next, k=st.k + 1)


def decrypt_residues(
    sk: PrivateKey, pk: PublicKey, spec: ControllerSpec, ciphertexts: Sequence[Ciphertext]
) -> tuple[int, ...]:
    modulus = spec.codec.modulus
    return tuple(decrypt(sk, pk, c) % modulus for c in ciphertexts)


def decrypt_state(
    sk: PrivateKey, pk: PublicKey, spec: ControllerSpec, st: EncState
) -> PlainIntState:
    return PlainIntState(x_hat=decrypt_residues(sk, pk, spec, st.x_tilde), k=st.k)


def decode_control(
    spec: ControllerSpec,
    sk: PrivateKey,
    pk: PublicKey,
    u_tilde: Sequence[Ciphertext],
    k: int,
) -> list[float]:
    _check_length("u_tilde", u_tilde, spec.n_u)
    return decode_outputs(spec, decrypt_residues(sk, pk, spec, u_tilde), k)
