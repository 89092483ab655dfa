"""
Participant keys and signatures for ILLUM
"""

import hashlib
import logging
from typing import Dict, Iterable, Optional

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from illum.core.config import settings
from illum.models.values import NULL, Participant

logger = logging.getLogger(__name__)

NULL_KEY = bytes(32)


class KeyManager:
    """Deterministic Ed25519 key material, one keypair per participant"""

    def __init__(self, seed: str = "0"):
        self.seed = str(seed)
        self._private: Dict[Participant, Ed25519PrivateKey] = {}
        self._public: Dict[Participant, bytes] = {}
        self._owners: Dict[bytes, Participant] = {NULL_KEY: NULL}

    def _derive(self, participant: Participant) -> Ed25519PrivateKey:
        material = f"{settings.KEY_SEED}|{self.seed}|{participant.name}".encode("utf-8")
        return Ed25519PrivateKey.from_private_bytes(hashlib.sha256(material).digest())

    def private_key(self, participant: Participant) -> Ed25519PrivateKey:
        if participant == NULL:
            raise ValueError("the Null participant has no private key")
        if participant not in self._private:
            key = self._derive(participant)
            raw = key.public_key().public_bytes(
                encoding=serialization.Encoding.Raw,
                format=serialization.PublicFormat.Raw,
            )
            self._private[participant] = key
            self._public[participant] = raw
            self._owners[raw] = participant
            logger.debug(f"Derived key for {participant.name}: {raw.hex()[:16]}")
        return self._private[participant]

    def public_key(self, participant: Participant) -> bytes:
        if participant == NULL:
            return NULL_KEY
        self.private_key(participant)
        return self._public[participant]

    def sign(self, participant: Participant, message: bytes) -> bytes:
        return self.private_key(participant).sign(message)

    def owner_of(self, public_key: bytes) -> Optional[Participant]:
        return self._owners.get(public_key)

    def key_map(self, participants: Iterable[Participant]) -> Dict[Participant, bytes]:
        return {p: self.public_key(p) for p in participants}


def verify_signature(public_key: bytes, signature: bytes, message: bytes) -> bool:
    """Ed25519 verification; malformed keys or signatures verify as false"""
    if not isinstance(public_key, bytes) or not isinstance(signature, bytes):
        return False
    if public_key == NULL_KEY or len(public_key) != 32 or len(signature) != 64:
        return False
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
        return True
    except (InvalidSignature, ValueError):
        return False
