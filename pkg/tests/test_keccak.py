"""Keccak-256 (original 0x01 padding) against published vectors and a reference sponge."""

import pytest
from hypothesis import given, settings, strategies as st

from statepin.crypto_core import keccak256
from statepin.keccak import keccak256_bytes, keccak_f1600

# Published Keccak-256 digests (Keccak team KATs and well-known Ethereum values)
VECTORS = [
    (b"", "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"),
    (b"a", "3ac225168df54212a25c1c01fd35bebfea408fdac2e31ddd6f80a4bbf9a5f1cb"),
    (b"abc", "4e03657aea45a94fc7d47ba826c8d667c0d1e6e33a64a036ec44f58fa12d6c45"),
    (b"hello", "1c8aff950685c2ed4bc3174f3472287b56d9517b9c948127319a09a7a36deac8"),
    (b"hello world", "47173285a8d7341e5e972fc677286384f802f8ef42a5ec5f03bbfa254cb01fad"),
    (b"testing", "5f16f4c7f149ac4f9510d9cf8cf384038ad348b3bcdc01915f95de12df9d1b02"),
    (b"The quick brown fox jumps over the lazy dog",
     "4d741b6f1eb29cb2a9b9911c82f56fa8d73b04959d3d9d222895df6c0b28aa15"),
    (b"The quick brown fox jumps over the lazy dog.",
     "578951e24efd62a3d63a86f7cd19aaa53c898fe287d2552133220370240b572d"),
    (b"Transfer(address,address,uint256)",
     "ddf252ad1be2c89b69c2b068fc378daa952ba7f163c4a11628f55a4df523b3ef"),
    (b"Approval(address,address,uint256)",
     "8c5be1e5ebec7d5bd14f71427d1e84f3dd0314c0f7b2291e5b200ac8c7c3b925"),
    (bytes.fromhex("cc"), "eead6dbfc7340a56caedc044696a168870549a6a7f6f56961e84a54bd9970b8a"),
    (bytes.fromhex("41fb"), "a8eaceda4d47b3281a795ad9e1ea2122b407baf9aabcb9e18b5717b7873537d2"),
    (bytes.fromhex("1f877c"), "627d7bc1491b2ab127282827b8de2d276b13d7d70fb4c5957fdf20655bc7ac30"),
]

SHA3_256_EMPTY = "a7ffc6f8bf1ed76651c14756a061d662f580ff4de43b49fa82d80a4b80f8434a"


@pytest.mark.parametrize("msg,digest", VECTORS)
def test_published_vectors(msg, digest):
    assert keccak256(msg).hex() == digest
    assert keccak256_bytes(msg).hex() == digest


def test_not_sha3_padding():
    assert keccak256(b"").hex() != SHA3_256_EMPTY


@pytest.mark.parametrize("n", [0, 1, 55, 56, 135, 136, 137, 271, 272, 273, 1000])
def test_reference_matches_backend_at_rate_boundaries(n):
    msg = bytes((i * 7 + 3) % 256 for i in range(n))
    assert keccak256_bytes(msg) == keccak256(msg)


@settings(max_examples=60, deadline=None)
@given(st.binary(max_size=400))
def test_reference_matches_backend(data):
    assert keccak256_bytes(data) == keccak256(data)


def test_permutation_of_zero_state():
    # first lane of Keccak-f[1600] applied to the all-zero state
    state = [0] * 25
    keccak_f1600(state)
    assert state[0] == 0xF1258F7940E1DDE7


def test_rejects_text():
    with pytest.raises(TypeError):
        keccak256("abc")
