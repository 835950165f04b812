"""Shared fixtures and scenario factories for the test suite."""

from __future__ import annotations

import pytest

from cascadesim.config import parse_config


def make_scenario(*, scenario="test", seed=1, server="inceptionv3",
                  catalog=None, policy="multitascpp", n_devices=5, tier="low",
                  slo_ms=100.0, n_samples=1000, switch_enabled=False,
                  initial_threshold=None, intermittent=None, devices=None,
                  **extra):
    policy_block = {"kind": policy, "switch_enabled": switch_enabled}
    if initial_threshold is not None:
        policy_block["initial_threshold"] = initial_threshold
    data = {
        "scenario": scenario,
        "seed": seed,
        "server": {"deployed": server, "catalog": catalog or [server]},
        "policy": policy_block,
        "devices": devices or [{
            "tier": tier, "count": n_devices, "slo_ms": slo_ms,
            "n_samples": n_samples,
        }],
    }
    if intermittent is not None:
        data["intermittent"] = intermittent
    data.update(extra)
    return parse_config(data)


@pytest.fixture
def small_scenario():
    return make_scenario(n_devices=2, n_samples=300)
