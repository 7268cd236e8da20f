"""
Tests for runtime settings.
"""

import logging

import numpy as np
import pytest

from mfdlq.config import THREADS_ENV, Settings, seed_sequence


class TestSettingsFromEnv:
    """Test reading ``MFDLQ_THREADS``."""

    def test_unset_means_auto(self, monkeypatch):
        monkeypatch.delenv(THREADS_ENV, raising=False)
        settings = Settings.from_env()
        assert settings.threads == 0
        assert settings.worker_count() >= 1

    def test_reads_process_environment(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, " 3 ")
        settings = Settings.from_env()
        assert settings.threads == 3
        assert settings.worker_count() == 3

    def test_explicit_mapping(self):
        assert Settings.from_env({THREADS_ENV: "2"}).threads == 2

    @pytest.mark.parametrize("raw,reason", [("many", "non-integer"), ("-2", "negative")])
    def test_bad_values_fall_back_to_auto(self, raw, reason, caplog):
        with caplog.at_level(logging.WARNING, logger="mfdlq.config"):
            settings = Settings.from_env({THREADS_ENV: raw})
        assert settings.threads == 0
        assert f"Ignoring {reason} {THREADS_ENV}" in caplog.text

    def test_defaults(self):
        settings = Settings()
        assert settings.max_decision_dim == 4096
        assert settings.block_size == 1024


class TestSeedSequence:
    """Test the mapping from integer seeds to random streams."""

    def test_non_negative_seed_is_plain_entropy(self):
        assert seed_sequence(7).entropy == 7
        assert seed_sequence(7, (3,)).spawn_key == (3,)

    def test_negative_seed_gets_its_own_stream(self):
        negative = np.random.default_rng(seed_sequence(-7)).random(4)
        positive = np.random.default_rng(seed_sequence(7)).random(4)
        again = np.random.default_rng(seed_sequence(-7)).random(4)

        np.testing.assert_array_equal(negative, again)
        assert not np.array_equal(negative, positive)
