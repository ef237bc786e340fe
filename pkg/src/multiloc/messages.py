from __future__ import annotations

import enum
from dataclasses import dataclass

from .envelope import Term


class MsgType(enum.Enum):
    # modified protocol, in happy-path wire order
    SHARE_TO_BB = "SHARE_TO_BB"
    AGENT_BRIEF = "AGENT_BRIEF"
    A_TO_KDC = "A_TO_KDC"
    BB_TO_KDC = "BB_TO_KDC"
    BB_BRIEF_B = "BB_BRIEF_B"
    KDC_TO_AA = "KDC_TO_AA"
    AA_TO_B = "AA_TO_B"
    # three-stage protocol
    TS1 = "TS1"
    TS2 = "TS2"
    TS3 = "TS3"


MODIFIED_ORDER = (
    MsgType.SHARE_TO_BB,
    MsgType.AGENT_BRIEF,
    MsgType.A_TO_KDC,
    MsgType.BB_TO_KDC,
    MsgType.BB_BRIEF_B,
    MsgType.KDC_TO_AA,
    MsgType.AA_TO_B,
)

THREE_STAGE_ORDER = (MsgType.TS1, MsgType.TS2, MsgType.TS3)


@dataclass(frozen=True)
class ProtocolMessage:
    """One wire message.

    ``session`` is simulator bookkeeping used to attribute outcomes to the run
    that caused them; parties never base a security decision on it.
    """

    msg_type: MsgType
    payload: Term
    sender: str
    receiver: str
    session: str = ""
