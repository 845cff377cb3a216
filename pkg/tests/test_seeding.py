"""Seed derivation: stable, label-sensitive, and collision-averse."""

import pytest

from vrpanneal.seeding import derive_seed


def test_derive_seed_is_deterministic():
    assert derive_seed(0) == derive_seed(0)
    assert derive_seed(5, "truck", 3, "solve") == derive_seed(5, "truck", 3, "solve")


def test_derive_seed_distinguishes_roots_and_labels():
    assert derive_seed(0) != derive_seed(1)
    assert derive_seed(0, "truck", 0) != derive_seed(0, "truck", 1)
    assert derive_seed(0, "truck", 0, "solve") != derive_seed(0, "truck", 0, "rectify")


def test_derive_seed_fits_a_generator_seed():
    values = {derive_seed(7, "truck", m, tag)
              for m in range(50) for tag in ("solve", "rectify")}
    assert len(values) == 100
    assert all(0 <= v < 2**64 for v in values)


def test_derive_seed_rejects_negative_root():
    with pytest.raises(ValueError, match="non-negative"):
        derive_seed(-1)
