"""Hashing, PRF sequencing, participant masking and map-key derivation.

Everything here is a pure function over fixed-width byte strings.  Digests,
keys, pins and identifiers are plain ``bytes``; the helpers below validate
widths at the boundaries where values enter the protocol.
"""

from __future__ import annotations

from typing import Union

try:
    from Crypto.Hash import keccak as _pycryptodome_keccak
except ImportError:  # pragma: no cover - exercised only without pycryptodome
    _pycryptodome_keccak = None

from statepin.keccak import keccak256_bytes as _reference_keccak256

DIGEST_LEN = 32
ADDRESS_LEN = 20
SALT_LEN = 32
COUNTER_BYTES = 8

Digest256 = bytes
Pin = bytes
MapKey = bytes
PBI = bytes
AccountId = bytes
MaskedId = bytes

ZERO_DIGEST: Digest256 = bytes(DIGEST_LEN)
ZERO_PIN: Pin = ZERO_DIGEST
# the reserved all-zero PBI of the Management Sidechain
MANAGEMENT_PBI: PBI = ZERO_DIGEST
# prev_key value meaning "Pin_{-1}" in a genesis contest proof
GENESIS_PREV_KEY: MapKey = ZERO_DIGEST
# literal 0xFFFFFFFF, left-padded to 256 bits
CONTESTED: Pin = bytes(DIGEST_LEN - 4) + b"\xff\xff\xff\xff"


class ChainSecret:
    """Private Blockchain Secret that seeds the PRF.

    The raw seed is held privately and is deliberately absent from ``repr``
    so it cannot leak into logs through string formatting.
    """

    __slots__ = ("_seed",)

    def __init__(self, seed: bytes):
        seed = bytes(seed)
        if len(seed) != DIGEST_LEN:
            raise ValueError(f"chain secret must be {DIGEST_LEN} bytes, got {len(seed)}")
        self._seed = seed

    @classmethod
    def from_hex(cls, text: str) -> "ChainSecret":
        return cls(from_hex(text, DIGEST_LEN))

    def reveal(self) -> bytes:
        return self._seed

    def __eq__(self, other):
        return isinstance(other, ChainSecret) and other._seed == self._seed

    def __hash__(self):
        return hash(("ChainSecret", self._seed))

    def __repr__(self):
        return "ChainSecret(<redacted>)"

    def __reduce__(self):
        raise TypeError("ChainSecret is not serializable")


def keccak256(data: bytes) -> Digest256:
    """KECCAK-256 as used by Ethereum (original padding, not FIPS-202 SHA3)."""
    if _pycryptodome_keccak is None:  # pragma: no cover
        return _reference_keccak256(data)
    return _pycryptodome_keccak.new(digest_bits=256, data=bytes(data)).digest()


def prf_value(secret: ChainSecret, t: int) -> Digest256:
    """PRF(t) = keccak256(seed || t as an 8-byte big-endian counter)."""
    if t < 0:
        raise ValueError("PRF counter must be non-negative")
    return keccak256(secret.reveal() + t.to_bytes(COUNTER_BYTES, "big"))


def derive_map_key(pbi: PBI, prev_pin: Pin, prf_t: Digest256) -> MapKey:
    """MapKey_t = keccak256(PBI || Pin_{t-1} || PRF(t)), tightly packed (96 bytes)."""
    _check_len(pbi, DIGEST_LEN, "pbi")
    _check_len(prev_pin, DIGEST_LEN, "prev_pin")
    _check_len(prf_t, DIGEST_LEN, "prf_t")
    return keccak256(bytes(pbi) + bytes(prev_pin) + bytes(prf_t))


def mask_participant(addr: AccountId, salt: bytes) -> MaskedId:
    """Salted commitment keccak256(addr || salt) over 52 bytes."""
    _check_len(addr, ADDRESS_LEN, "account")
    _check_len(salt, SALT_LEN, "salt")
    return keccak256(bytes(addr) + bytes(salt))


def verify_mask(masked: MaskedId, addr: AccountId, salt: bytes) -> bool:
    return mask_participant(addr, salt) == masked


def is_contested(pin: Pin) -> bool:
    return pin == CONTESTED


class KeyChain:
    """Incremental MapKey sequence for one private chain.

    Tracks the next PRF counter and the last accepted pin.  A contested pin
    consumes its PRF value without becoming the new predecessor, so the
    replacement key is derived from the same previous pin and PRF(t+1).
    """

    def __init__(self, pbi: PBI, secret: ChainSecret):
        _check_len(pbi, DIGEST_LEN, "pbi")
        self.pbi = bytes(pbi)
        self._secret = secret
        self.counter = 0
        self.prev_pin = ZERO_PIN
        self.prev_key = GENESIS_PREV_KEY

    def prf(self, t: int | None = None) -> Digest256:
        return prf_value(self._secret, self.counter if t is None else t)

    def next_key(self) -> MapKey:
        return derive_map_key(self.pbi, self.prev_pin, self.prf())

    def accept(self, key: MapKey, pin: Pin) -> None:
        self.prev_pin = pin
        self.prev_key = key
        self.counter += 1

    def skip(self) -> None:
        """Consume the current PRF value after the pin at its key was contested."""
        self.counter += 1

    def clone(self) -> "KeyChain":
        other = KeyChain(self.pbi, self._secret)
        other.counter = self.counter
        other.prev_pin = self.prev_pin
        other.prev_key = self.prev_key
        return other

    def __repr__(self):
        return f"KeyChain(pbi={to_hex(self.pbi)}, counter={self.counter})"


def map_key_sequence(pbi: PBI, secret: ChainSecret, pins: list[Pin]) -> list[MapKey]:
    """Keys MapKey_0..MapKey_n for an uncontested pin history p_0..p_{n-1}.

    Recomputed from scratch; the last key is where the next pin would go.
    """
    keys = []
    prev = ZERO_PIN
    for t in range(len(pins) + 1):
        keys.append(derive_map_key(pbi, prev, prf_value(secret, t)))
        if t < len(pins):
            prev = pins[t]
    return keys


def hamming_distance(a: bytes, b: bytes) -> int:
    if len(a) != len(b):
        raise ValueError("length mismatch")
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).bit_count()


def hamming_weight(a: bytes) -> int:
    return int.from_bytes(a, "big").bit_count()


def to_hex(value: bytes) -> str:
    """Lowercase, 0x-prefixed, fixed-width hex."""
    return "0x" + bytes(value).hex()


def from_hex(text: str, length: int | None = None) -> bytes:
    if not isinstance(text, str) or not text.startswith("0x"):
        raise ValueError(f"expected 0x-prefixed hex, got {text!r}")
    raw = bytes.fromhex(text[2:])
    if length is not None and len(raw) != length:
        raise ValueError(f"expected {length} bytes, got {len(raw)} in {text!r}")
    return raw


def account(value: Union[str, bytes, int]) -> AccountId:
    """Coerce a hex string, raw bytes or small integer into a 20-byte account."""
    if isinstance(value, int):
        return value.to_bytes(ADDRESS_LEN, "big")
    if isinstance(value, str):
        return from_hex(value, ADDRESS_LEN)
    _check_len(value, ADDRESS_LEN, "account")
    return bytes(value)


def _check_len(value: bytes, length: int, name: str) -> None:
    if len(value) != length:
        raise ValueError(f"{name} must be {length} bytes, got {len(value)}")
