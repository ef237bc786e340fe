"""Multi-located party authentication: grammar codec, commuting transforms,
share splitting, symbolic crypto, protocol engine and network simulator."""

from __future__ import annotations

from .commuting import SymbolStream, TransformDomain, TransformKey, apply, invert, keygen, lift, unlift
from .errors import (
    CodecError,
    CodePointOverflow,
    ConfigError,
    DomainMismatch,
    DomainTooSmall,
    EnvelopeError,
    IllegalDerivation,
    MultilocError,
    NonZeroPadding,
    ShareMismatch,
    TransformError,
    UnknownKey,
    WrongKey,
)
from .grammar import (
    BitString,
    ChunkGrammar,
    Grammar,
    ProductionSequence,
    bits_to_text,
    chunk_grammar,
    decode,
    encode,
    encode_text,
    text_to_bits,
)
from .protocol import ProtocolParams, SessionResult, Status, run_modified_protocol, run_three_stage
from .scenario import ScenarioConfig, load_scenario, parse_scenario, run_scenario, schedule_and_run
from .shares import Role, Share, SplitPolicy, merge, split
from .verdict import Claim, VerdictReport, attack_verdict

__version__ = "0.1.0"
