from __future__ import annotations

import numpy as np
import pytest

from callcenter_iv import simulator
from callcenter_iv.ingest import CallRecord

T0 = 1677628800  # 2023-03-01T00:00:00Z


def call(call_id, t=0, customer="c1", phone=None, agent="A1", queue="Q1", wait=30.0,
         transferred=False, surveyed=True, csat=4, fcr=True, market="CO", tier="D",
         log_hours=1.0, bookings=0, abandoned=False, flags=None):
    return CallRecord(
        call_id=call_id, customer_id=customer, phone=phone, agent_id=agent, queue_id=queue,
        start_time=T0 + t, waiting_time=wait, transferred=transferred, surveyed=surveyed,
        csat=csat if surveyed else None, fcr=fcr if surveyed else None, market=market,
        ffp_tier=tier, log_hours_from_last_call=log_hours, bookings_past_12m=bookings,
        outcome_flags=flags or {}, abandoned=abandoned,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_sim():
    """Three simulated days of the biased preset."""
    return simulator.run(simulator.scenario_multiqueue_bias(seed=3, horizon_days=3))
