"""Finite-dimensional simulation of tamper-evident quantum encryption of classical messages."""

from ._kernels import BACKEND
from .channels import (
    FLAG,
    ChannelDiagnostics,
    ChannelKind,
    KrausChannel,
    Povm,
    apply_channel,
    cgm_of_channel,
    compose_channels,
    identity_channel,
    povm_of_channel,
    structured_channel,
    tensor_channels,
    validate_channel,
)
from .circuits import Circuit, DimensionCapError, dim_cap
from .constructions import (
    BaselineKind,
    baseline_scheme,
    conj_parity_pad,
    double_of,
    drop_flag,
    extend_messages,
    nfold,
    otp_with_te_key,
    parallel_compose,
    qm_of,
    rev_of,
    star_of,
    te_of,
)
from .qmath import (
    BoundKind,
    HelstromPair,
    SpaceShape,
    bound_eval,
    helstrom_pair,
    partial_trace,
    spectral_decompose,
    td_pure,
    trace_distance,
    trace_norm,
)
from .schemes import (
    AqecmScheme,
    GroupTable,
    KeyDist,
    QecmrScheme,
    QecmScheme,
    QmScheme,
    TamperProfile,
    correctness_gap,
    encryption_gap,
    qm_forgery_value,
    revocation_profile,
    tamper_profile,
)

__all__ = [
    "apply_channel",
    "AqecmScheme",
    "BACKEND",
    "baseline_scheme",
    "BaselineKind",
    "bound_eval",
    "BoundKind",
    "cgm_of_channel",
    "ChannelDiagnostics",
    "ChannelKind",
    "Circuit",
    "compose_channels",
    "conj_parity_pad",
    "correctness_gap",
    "dim_cap",
    "DimensionCapError",
    "double_of",
    "drop_flag",
    "encryption_gap",
    "extend_messages",
    "FLAG",
    "GroupTable",
    "helstrom_pair",
    "HelstromPair",
    "identity_channel",
    "KeyDist",
    "KrausChannel",
    "nfold",
    "otp_with_te_key",
    "parallel_compose",
    "partial_trace",
    "Povm",
    "povm_of_channel",
    "QecmrScheme",
    "QecmScheme",
    "qm_forgery_value",
    "qm_of",
    "QmScheme",
    "rev_of",
    "revocation_profile",
    "SpaceShape",
    "spectral_decompose",
    "star_of",
    "structured_channel",
    "tamper_profile",
    "TamperProfile",
    "td_pure",
    "te_of",
    "tensor_channels",
    "trace_distance",
    "trace_norm",
    "validate_channel",
]
