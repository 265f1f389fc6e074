"""Discrete-event multi-queue call-center simulator with a known causal effect.

Calls arrive per queue as a Poisson process with an hourly intensity
profile, wait first-come first-served until a certified, on-duty, idle
agent is free, and are served for an exponential time scaled by the agent's
skill. Idle agents are picked longest-idle first. A freed agent picks one
of its non-empty queues at random (or the oldest head call, with
``routing="oldest"``). An agent's hourly ``plan`` can narrow the queues it
serves during given hours of the day.

Satisfaction is a latent index of agent skill, customer anger and noise,
cut into a 0-5 CSAT score (and an FCR flag). The recontact probability is
linear in the normalized CSAT with slope ``beta_true`` plus an anger term,
so anger confounds the naive regression while agent assignment does not.
A recontact is realised as a new call from the same customer.
"""

from __future__ import annotations

import bisect
import configparser
import csv
import heapq
import math
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import IO, Sequence

import numpy as np

from .ingest import OUTCOME_FLAGS, CallRecord

STUDY_START = 1677628800  # 2023-03-01T00:00:00Z

MARKETS = ("CO", "PE", "BR", "US", "EU")
# caller market mix by time of day: morning, afternoon, night
MARKET_MIX = np.array([
    (0.45, 0.2, 0.05, 0.05, 0.25),
    (0.5, 0.25, 0.15, 0.07, 0.03),
    (0.15, 0.1, 0.2, 0.4, 0.15),
])
MIX_OF_HOUR = np.array([2] * 6 + [0] * 8 + [1] * 8 + [2] * 2)
TIERS = ("D", "NoInfo", "Elite")
TIER_PROBS = (0.7, 0.25, 0.05)

# substream tags
_ARRIVALS, _AGENT, _OUTCOME, _ROSTER = 1, 2, 3, 4


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class QueueConfig:
    queue_id: str
    arrival_rate: float
    service_time_mean: float
    hourly_profile: tuple[float, ...] = (1.0,) * 24


@dataclass(frozen=True)
class AgentConfig:
    agent_id: str
    certifications: tuple[str, ...]
    skill: float
    shift: tuple[tuple[float, float], ...] = ((0.0, 24.0),)
    # (from_hour, to_hour, queues): serve only these queues in that daily window
    plan: tuple[tuple[int, int, tuple[str, ...]], ...] = ()


@dataclass(frozen=True)
class SimConfig:
    queues: tuple[QueueConfig, ...]
    agents: tuple[AgentConfig, ...]
    horizon_days: int = 14
    beta_true: float = -0.65
    confounder_strength: float = 1.0
    survey_response_rate: float = 0.38
    seed: int = 0
    link: str = "linear"
    # queue choice for a freed agent with several non-empty queues:
    # "random" picks one uniformly, "oldest" takes the oldest head call
    routing: str = "random"
    # recontact model: p = base + hourly + beta * csat/5 + strength * loading * anger
    recontact_base: float = 0.85
    anger_recontact_loading: float = -0.15
    recontact_hourly: tuple[float, ...] = (0.0,) * 24
    recontact_delay_hours: tuple[float, float] = (0.25, 20.0)
    # satisfaction latent: intercept + skill_loading * skill - strength * sat_loading * anger + noise
    sat_intercept: float = 0.9
    skill_loading: float = 2.0
    anger_sat_loading: float = 2.0
    sat_noise_sd: float = 1.0
    csat_cuts: tuple[float, ...] = (-0.2, 0.0, 0.1, 0.25, 0.55)
    fcr_cut: float = 0.3
    # anger latent, squashed to (0, 1)
    anger_mean: float = 0.0
    anger_sd: float = 1.5
    anger_market_shift: float = 0.6
    anger_tier_shift: float = -0.4
    anger_hourly: tuple[float, ...] = (0.0,) * 24
    # service and identity
    service_skill_slope: float = 0.5
    transfer_rate: float = 0.03
    missing_customer_id_rate: float = 0.08
    unidentified_rate: float = 0.01
    family_share_rate: float = 0.02
    alternate_phone_rate: float = 0.2
    n_agencies: int = 2
    agency_customers: int = 40
    agency_call_share: float = 0.01
    start_epoch: int = STUDY_START
    drain_hours: float = 24.0

    def validate(self) -> None:
        ids = [q.queue_id for q in self.queues]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate queue ids")
        for q in self.queues:
            if q.arrival_rate < 0:
                raise ConfigError(f"queue {q.queue_id}: negative arrival rate")
            if q.service_time_mean <= 0:
                raise ConfigError(f"queue {q.queue_id}: service_time_mean must be positive")
            if len(q.hourly_profile) != 24 or min(q.hourly_profile) < 0:
                raise ConfigError(f"queue {q.queue_id}: hourly_profile needs 24 nonnegative values")
            if not any(q.queue_id in a.certifications for a in self.agents):
                raise ConfigError(f"queue {q.queue_id} has no certified agent")
        for a in self.agents:
            unknown = set(a.certifications) - set(ids)
            if unknown:
                raise ConfigError(f"agent {a.agent_id}: unknown queues {sorted(unknown)}")
            for lo, hi, qs in a.plan:
                if not (0 <= lo < 24 and 0 < hi <= 24 and lo != hi):
                    raise ConfigError(f"agent {a.agent_id}: plan hours must be whole hours in [0, 24]")
                if not set(qs) <= set(a.certifications):
                    raise ConfigError(f"agent {a.agent_id}: plan names queues it is not certified for")
            if not 0 <= a.skill <= 1:
                raise ConfigError(f"agent {a.agent_id}: skill outside [0, 1]")
        if self.horizon_days < 0:
            raise ConfigError("horizon_days must be nonnegative")
        if not 0 <= self.survey_response_rate <= 1:
            raise ConfigError("survey_response_rate outside [0, 1]")
        if self.confounder_strength < 0:
            raise ConfigError("confounder_strength must be nonnegative")
        if self.routing not in ("random", "oldest"):
            raise ConfigError("routing must be 'random' or 'oldest'")
        if self.link not in ("linear", "logistic"):
            raise ConfigError("link must be 'linear' or 'logistic'")
        if list(self.csat_cuts) != sorted(self.csat_cuts) or len(self.csat_cuts) != 5:
            raise ConfigError("csat_cuts must be 5 increasing thresholds")
        lo, hi = self.recontact_delay_hours
        if not 0 < lo <= hi < 24:
            raise ConfigError("recontact_delay_hours must satisfy 0 < min <= max < 24")


@dataclass
class GroundTruth:
    call_id: str
    anger: float
    recontact_prob: float
    recontact_drawn: bool
    recontact_emitted: bool
    arrival_hours: float
    service_start_hours: float
    service_end_hours: float
    skill: float


@dataclass
class SimResult:
    calls: list[CallRecord]
    truth: list[GroundTruth]
    arrivals: int
    served: int
    abandoned: int
    clamp_events: int
    config: SimConfig = field(repr=False, default=None)


class _Draws:
    """Buffered scalar draws from one generator; deterministic order."""

    def __init__(self, rng: np.random.Generator, size: int = 4096):
        self.rng = rng
        self.size = size
        self.u = rng.random(size)
        self.i = 0
        self.e = rng.standard_exponential(size)
        self.j = 0
        self.g = rng.standard_normal(size)
        self.k = 0

    def uniform(self) -> float:
        if self.i == self.size:
            self.u, self.i = self.rng.random(self.size), 0
        self.i += 1
        return self.u[self.i - 1]

    def exponential(self) -> float:
        if self.j == self.size:
            self.e, self.j = self.rng.standard_exponential(self.size), 0
        self.j += 1
        return self.e[self.j - 1]

    def normal(self) -> float:
        if self.k == self.size:
            self.g, self.k = self.rng.standard_normal(self.size), 0
        self.k += 1
        return self.g[self.k - 1]


def _stream(seed: int, tag: int, index: int = 0) -> np.random.Generator:
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, tag, index])


class _Call:
    __slots__ = ("idx", "queue", "arrival", "customer", "phone", "market", "tier",
                 "log_hours", "bookings", "anger", "transferred", "agency",
                 "agent", "start", "end", "csat", "fcr", "surveyed", "p", "drawn",
                 "emitted", "flags", "abandoned", "hidden_id")

    def __init__(self, idx, queue, arrival):
        self.idx = idx
        self.queue = queue
        self.arrival = arrival
        self.agent = -1
        self.start = math.nan
        self.end = math.nan
        self.csat = None
        self.fcr = None
        self.p = math.nan
        self.drawn = False
        self.emitted = False
        self.abandoned = False


def _logistic(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


class _Engine:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.q_index = {q.queue_id: i for i, q in enumerate(cfg.queues)}
        self.n_agents = len(cfg.agents)
        self.skill = [a.skill for a in cfg.agents]
        self.certified = [[a for a, ag in enumerate(cfg.agents) if q.queue_id in ag.certifications]
                          for q in cfg.queues]
        self.agent_queues = [[self.q_index[c] for c in ag.certifications] for ag in cfg.agents]
        # queues each agent serves, by hour of day
        self.allowed = []
        for a, ag in enumerate(cfg.agents):
            hours = [list(self.agent_queues[a]) for _ in range(24)]
            for lo, hi, qs in ag.plan:
                length = (int(hi) - int(lo)) % 24 or 24
                for h in range(int(lo), int(lo) + length):
                    hours[h % 24] = [self.q_index[q] for q in ag.certifications if q in qs]
            self.allowed.append(hours)
        self.on_duty = [False] * self.n_agents
        self.busy = [False] * self.n_agents
        self.idle_since = [0.0] * self.n_agents
        self.waiting = [deque() for _ in cfg.queues]
        self.heap: list = []
        self.seq = 0
        self.calls: list[_Call] = []
        self.agent_draws = [_Draws(_stream(cfg.seed, _AGENT, i), 256) for i in range(self.n_agents)]
        self.out = _Draws(_stream(cfg.seed, _OUTCOME))
        self.end_arrivals = cfg.horizon_days * 24.0
        self.clamps = 0
        self.n_customers = 0
        self.customer_phones: list[str] = []
        self.base_phone: dict[str, str] = {}

    # -- events -----------------------------------------------------------
    def push(self, time: float, kind: int, payload) -> None:
        heapq.heappush(self.heap, (time, self.seq, kind, payload))
        self.seq += 1

    def schedule_shifts(self) -> None:
        days = self.cfg.horizon_days + int(math.ceil(self.cfg.drain_hours / 24.0)) + 1
        for a, ag in enumerate(self.cfg.agents):
            for start, end in ag.shift:
                length = (end - start) % 24 or 24.0
                for d in range(-1, days):
                    t0 = d * 24.0 + start
                    self.push(t0, 0, a)
                    self.push(t0 + length, 1, a)
            for lo, hi, _ in ag.plan:
                for d in range(-1, days):
                    self.push(d * 24.0 + lo, 4, a)
                    self.push(d * 24.0 + hi, 4, a)

    # -- callers ----------------------------------------------------------
    def new_customer(self, rng: np.random.Generator) -> tuple[str, str]:
        self.n_customers += 1
        cid = f"U{self.n_customers:07d}"
        if self.customer_phones and rng.random() < self.cfg.family_share_rate:
            phone = self.customer_phones[int(rng.integers(len(self.customer_phones)))]
        else:
            phone = f"+57{self.n_customers:09d}"
        self.customer_phones.append(phone)
        return cid, phone

    def fresh_arrivals(self) -> None:
        cfg = self.cfg
        agencies = [(f"+1800{k:06d}", [f"AG{k:02d}{m:04d}" for m in range(cfg.agency_customers)])
                    for k in range(cfg.n_agencies)]
        for qi, q in enumerate(cfg.queues):
            rng = _stream(cfg.seed, _ARRIVALS, qi)
            times = []
            for day in range(cfg.horizon_days):
                for h in range(24):
                    lam = q.arrival_rate * q.hourly_profile[h]
                    k = rng.poisson(lam) if lam > 0 else 0
                    if k:
                        times.append(np.sort(day * 24.0 + h + rng.random(k)))
            if not times:
                continue
            times = np.concatenate(times)
            n = times.size
            hours = (times % 24).astype(int)
            cum = np.cumsum(MARKET_MIX, axis=1)[MIX_OF_HOUR[hours]]
            market_idx = (rng.random(n)[:, None] * cum[:, -1:] > cum).sum(axis=1)
            cum_tier = np.cumsum(TIER_PROBS)
            tier_idx = np.searchsorted(cum_tier, rng.random(n) * cum_tier[-1])
            log_hours = np.log1p(rng.exponential(720.0, n))
            bookings = rng.poisson(np.where(tier_idx == 2, 4.0, 1.2))
            ident = rng.random(n)
            agency_u = rng.random(n)
            agency_pick = rng.integers(0, max(cfg.n_agencies, 1), n)
            agency_member = rng.integers(0, max(cfg.agency_customers, 1), n)
            for i in range(n):
                c = _Call(len(self.calls), qi, float(times[i]))
                c.market = MARKETS[market_idx[i]]
                c.tier = TIERS[tier_idx[i]]
                c.log_hours = float(log_hours[i])
                c.bookings = int(bookings[i])
                c.agency = cfg.n_agencies > 0 and agency_u[i] < cfg.agency_call_share
                if c.agency:
                    phone, members = agencies[agency_pick[i]]
                    c.customer, c.phone = members[agency_member[i]], phone
                    c.hidden_id = c.customer
                else:
                    cid, phone = self.new_customer(rng)
                    c.hidden_id = cid
                    c.phone = phone
                    c.customer = cid
                    if ident[i] < cfg.unidentified_rate:
                        c.customer, c.phone = None, None
                    elif ident[i] < cfg.unidentified_rate + cfg.missing_customer_id_rate:
                        c.customer = None
                    self.base_phone[cid] = phone
                self._draw_call_state(c)
                self.calls.append(c)
                self.push(c.arrival, 2, c)

    def _draw_call_state(self, c: _Call) -> None:
        cfg, d = self.cfg, self.out
        h = int(c.arrival % 24)
        shift = cfg.anger_mean + cfg.anger_hourly[h]
        if c.market in ("US", "EU", "BR"):
            shift += cfg.anger_market_shift
        if c.tier == "Elite":
            shift += cfg.anger_tier_shift
        c.anger = _logistic(shift + cfg.anger_sd * d.normal())
        c.transferred = d.uniform() < cfg.transfer_rate
        c.surveyed = d.uniform() < cfg.survey_response_rate
        c.flags = {
            "claims_7d": d.uniform() < 0.02 + 0.04 * c.anger,
            "claims_28d": d.uniform() < 0.05 + 0.06 * c.anger,
            "refund_request": d.uniform() < 0.01,
            "regulatory_claim": d.uniform() < 0.004 + 0.004 * c.anger,
            "high_priority_claim": d.uniform() < 0.01 + 0.01 * c.anger,
        }

    def recontact_call(self, prev: _Call, time: float) -> _Call:
        cfg, d = self.cfg, self.out
        c = _Call(len(self.calls), prev.queue, time)
        c.market, c.tier, c.bookings = prev.market, prev.tier, prev.bookings
        c.log_hours = math.log1p(time - prev.arrival)
        c.agency = prev.agency
        c.hidden_id = prev.hidden_id
        c.customer, c.phone = prev.customer, prev.phone
        # every recontact shares an identifier with the call it follows
        if not c.agency and (prev.customer or prev.phone):
            base_phone = self.base_phone.get(c.hidden_id)
            u = d.uniform()
            if u < cfg.alternate_phone_rate and prev.customer:
                c.phone = f"+58{c.idx:09d}"
            elif (u < cfg.alternate_phone_rate + cfg.missing_customer_id_rate
                  and prev.phone is not None and prev.phone == base_phone):
                c.customer = None
        self._draw_call_state(c)
        self.calls.append(c)
        return c

    # -- service ----------------------------------------------------------
    def start_service(self, a: int, c: _Call, now: float) -> None:
        cfg = self.cfg
        q = cfg.queues[c.queue]
        self.busy[a] = True
        c.agent = a
        c.start = now
        scale = 1.0 + cfg.service_skill_slope * (0.5 - self.skill[a])
        duration = self.agent_draws[a].exponential() * q.service_time_mean * scale / 60.0
        self.push(now + duration, 3, (a, c))

    def finish(self, a: int, c: _Call, now: float) -> None:
        cfg, d = self.cfg, self.out
        c.end = now
        latent = (cfg.sat_intercept + cfg.skill_loading * self.skill[a]
                  - cfg.confounder_strength * cfg.anger_sat_loading * c.anger
                  + cfg.sat_noise_sd * d.normal())
        c.csat = bisect.bisect_left(cfg.csat_cuts, latent)
        c.fcr = latent + 0.7 * d.normal() > cfg.fcr_cut
        h = int(c.arrival % 24)
        index = (cfg.recontact_base + cfg.recontact_hourly[h] + cfg.beta_true * c.csat / 5.0
                 + cfg.confounder_strength * cfg.anger_recontact_loading * c.anger)
        if cfg.link == "logistic":
            p = _logistic(index)
        else:
            p = min(max(index, 0.0), 1.0)
            if p != index:
                self.clamps += 1
        c.p = p
        c.drawn = d.uniform() < p
        lo, hi = cfg.recontact_delay_hours
        delay = lo + (hi - lo) * d.uniform()
        if c.drawn:
            when = min(now + delay, c.arrival + 23.9)
            if when < self.end_arrivals:
                c.emitted = True
                self.push(when, 2, self.recontact_call(c, when))

    def next_call_for(self, a: int, now: float):
        if self.cfg.routing == "random":
            ready = [qi for qi in self.allowed[a][int(now % 24)] if self.waiting[qi]]
            if not ready:
                return None
            pick = ready[0] if len(ready) == 1 else ready[int(self.agent_draws[a].uniform() * len(ready))]
            return self.waiting[pick].popleft()
        best = None
        for qi in self.allowed[a][int(now % 24)]:
            w = self.waiting[qi]
            if w and (best is None or w[0].arrival < best[0].arrival
                      or (w[0].arrival == best[0].arrival and w[0].idx < best[0].idx)):
                best = w
        return best.popleft() if best is not None else None

    def free_agent(self, a: int, now: float) -> None:
        self.busy[a] = False
        if self.on_duty[a]:
            c = self.next_call_for(a, now)
            if c is not None:
                self.start_service(a, c, now)
                return
        self.idle_since[a] = now

    def arrive(self, c: _Call, now: float) -> None:
        best = -1
        h = int(now % 24)
        for a in self.certified[c.queue]:
            if self.on_duty[a] and not self.busy[a] and c.queue in self.allowed[a][h]:
                if best < 0 or self.idle_since[a] < self.idle_since[best]:
                    best = a
        if best >= 0:
            self.start_service(best, c, now)
        else:
            self.waiting[c.queue].append(c)

    def run(self) -> None:
        self.schedule_shifts()
        self.fresh_arrivals()
        stop = self.end_arrivals + self.cfg.drain_hours
        heap = self.heap
        while heap:
            now, _, kind, payload = heapq.heappop(heap)
            if now > stop:
                break
            if kind == 2:
                self.arrive(payload, now)
            elif kind == 3:
                a, c = payload
                self.finish(a, c, now)
                self.free_agent(a, now)
            elif kind == 0:
                a = payload
                if not self.on_duty[a]:
                    self.on_duty[a] = True
                    if not self.busy[a]:
                        self.free_agent(a, now)
            elif kind == 4:
                # plan boundary: an idle agent may now serve a waiting queue
                a = payload
                if self.on_duty[a] and not self.busy[a]:
                    c = self.next_call_for(a, now)
                    if c is not None:
                        self.start_service(a, c, now)
            else:
                self.on_duty[payload] = False
        for w in self.waiting:
            for c in w:
                c.abandoned = True
        for c in self.calls:
            if c.agent >= 0 and math.isnan(c.end):
                c.abandoned = True


def run(config: SimConfig) -> SimResult:
    """Simulate ``config`` and return ingest-ready records plus ground truth."""
    config.validate()
    eng = _Engine(config)
    eng.run()
    cfg = config
    order = sorted(eng.calls, key=lambda c: (c.arrival, c.idx))
    records: list[CallRecord] = []
    truth: list[GroundTruth] = []
    served = abandoned = 0
    for i, c in enumerate(order):
        call_id = f"CALL{i + 1:07d}"
        start = cfg.start_epoch + int(math.floor(c.arrival * 3600.0))
        if c.abandoned:
            abandoned += 1
            agent_id, wait = "", 0.0
        else:
            served += 1
            agent_id = cfg.agents[c.agent].agent_id
            wait = round((c.start - c.arrival) * 3600.0, 1)
        surveyed = c.surveyed and not c.abandoned
        records.append(CallRecord(
            call_id=call_id,
            customer_id=c.customer,
            phone=c.phone,
            agent_id=agent_id,
            queue_id=cfg.queues[c.queue].queue_id,
            start_time=start,
            waiting_time=wait,
            transferred=c.transferred,
            surveyed=surveyed,
            csat=c.csat if surveyed else None,
            fcr=c.fcr if surveyed else None,
            market=c.market,
            ffp_tier=c.tier,
            log_hours_from_last_call=round(c.log_hours, 6),
            bookings_past_12m=c.bookings,
            outcome_flags={k: c.flags[k] for k in OUTCOME_FLAGS},
            abandoned=c.abandoned,
        ))
        truth.append(GroundTruth(
            call_id=call_id, anger=c.anger, recontact_prob=c.p,
            recontact_drawn=c.drawn, recontact_emitted=c.emitted,
            arrival_hours=c.arrival, service_start_hours=c.start,
            service_end_hours=c.end,
            skill=cfg.agents[c.agent].skill if c.agent >= 0 else math.nan,
        ))
    return SimResult(records, truth, len(order), served, abandoned, eng.clamps, config)


def write_truth(truth: Sequence[GroundTruth], out: IO[str]) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["call_id", "anger", "recontact_prob", "recontact_drawn",
                     "recontact_emitted", "service_start_hours", "service_end_hours", "skill"])
    for t in truth:
        writer.writerow([t.call_id, f"{t.anger:.6f}", f"{t.recontact_prob:.6f}",
                         int(t.recontact_drawn), int(t.recontact_emitted),
                         f"{t.service_start_hours:.6f}", f"{t.service_end_hours:.6f}",
                         f"{t.skill:.4f}"])


# ---------------------------------------------------------------------------
# presets


def _normalized(profile: Sequence[float]) -> tuple[float, ...]:
    m = sum(profile) / len(profile)
    return tuple(round(p / m, 6) for p in profile)


Q1_PROFILE = _normalized([0.35, 0.3, 0.25, 0.25, 0.3, 0.45, 0.8, 1.1, 1.35, 1.5, 1.55, 1.5,
                          1.35, 1.3, 1.35, 1.4, 1.4, 1.35, 1.2, 1.05, 0.9, 0.75, 0.6, 0.45])
Q2_PROFILE = _normalized([0.2, 0.2, 0.2, 0.2, 0.2, 0.3, 0.5, 0.8, 1.2, 2.2, 3.0, 3.2,
                          3.0, 2.4, 1.6, 1.1, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2])
NIGHT_RECONTACT = tuple(0.03 if (h >= 22 or h < 6) else 0.0 for h in range(24))


def _roster(rng: np.random.Generator, homogeneous: bool, scale: int = 1) -> tuple[AgentConfig, ...]:
    # nine-hour shifts starting up to an hour either side of the block start,
    # so neighbouring blocks overlap and share time spans
    starts = {"M": 6, "A": 14, "N": 22}
    # (block, certifications, count, skill range)
    plan = [
        ("M", ("Q1",), 11, (0.2, 0.35)),
        ("M", ("Q1", "Q2"), 6, (0.7, 0.9)),
        ("M", ("Q2",), 3, (0.3, 0.7)),
        ("A", ("Q1",), 9, (0.5, 0.65)),
        ("A", ("Q1", "Q2"), 5, (0.8, 0.95)),
        ("A", ("Q2",), 1, (0.3, 0.7)),
        ("N", ("Q1",), 6, (0.0, 0.1)),
        ("N", ("Q1", "Q2"), 2, (0.3, 0.45)),
        ("N", ("Q2",), 1, (0.3, 0.7)),
    ]
    agents = []
    for block, certs, count, (lo, hi) in plan:
        for _ in range(count * scale):
            skill = 0.5 if homogeneous else float(rng.uniform(lo, hi))
            start = float((starts[block] + int(rng.integers(-1, 2))) % 24)
            # during the second queue's peak, multi-certified agents are moved there
            plan = ((9, 15, ("Q2",)),) if len(certs) > 1 else ()
            agents.append(AgentConfig(f"A{len(agents) + 1:03d}", certs, round(skill, 4),
                                      ((start, (start + 9.0) % 24),), plan))
    return tuple(agents)


def scenario_multiqueue_bias(seed: int = 0, homogeneous_skill: bool = False, scale: int = 1,
                             horizon_days: int = 14, **overrides) -> SimConfig:
    """Two queues; multi-certified agents are more skilled and are pulled to
    the second queue when its midday peak builds. Agent availability in the
    studied queue (Q1) therefore varies with time of day, as do the market
    mix, customer anger and baseline recontact rates.

    ``scale`` multiplies both the arrival rates and the roster.
    """
    cfg = SimConfig(
        queues=(QueueConfig("Q1", 40.0 * scale, 7.0, Q1_PROFILE),
                QueueConfig("Q2", 10.0 * scale, 12.0, Q2_PROFILE)),
        agents=_roster(np.random.default_rng(20230301), homogeneous_skill, scale),
        horizon_days=horizon_days,
        beta_true=-0.65,
        confounder_strength=1.0,
        recontact_hourly=NIGHT_RECONTACT,
        anger_hourly=tuple(0.4 if 10 <= h < 15 else 0.0 for h in range(24)),
        seed=seed,
    )
    return replace(cfg, **overrides) if overrides else cfg


def scenario_random_routing(seed: int = 0, n_agents: int = 60, **overrides) -> SimConfig:
    """Single queue, round-the-clock identical staffing and flat profiles.

    Assignment is unrelated to anything about the caller, so every validity
    check should pass at its nominal rate.
    """
    rng = np.random.default_rng(7)
    agents = tuple(AgentConfig(f"A{i + 1:03d}", ("Q1",), round(float(rng.uniform(0.1, 0.9)), 4))
                   for i in range(n_agents))
    cfg = SimConfig(queues=(QueueConfig("Q1", 180.0, 7.0),), agents=agents, horizon_days=3,
                    seed=seed)
    return replace(cfg, **overrides) if overrides else cfg


PRESETS = {
    "multiqueue_bias": scenario_multiqueue_bias,
    "random_routing": scenario_random_routing,
}


# ---------------------------------------------------------------------------
# config files


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _shift(text: str) -> tuple[tuple[float, float], ...]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if part:
            lo, hi = part.split("-")
            out.append((float(lo), float(hi)))
    return tuple(out)


def _plan(text: str) -> tuple[tuple[int, int, tuple[str, ...]], ...]:
    # "9-15:Q2, 20-22:Q1+Q2"
    out = []
    for part in text.split(","):
        part = part.strip()
        if part:
            hours, queues = part.split(":")
            lo, hi = hours.split("-")
            out.append((int(lo), int(hi), tuple(q.strip() for q in queues.split("+"))))
    return tuple(out)


_SCALARS = {f.name: f.type for f in SimConfig.__dataclass_fields__.values()
            if f.name not in ("queues", "agents")}


def load_config(path: str | Path) -> SimConfig:
    """Read an INI-style simulator config.

    ``[simulation]`` holds scalar fields (``preset = multiqueue_bias`` starts
    from a preset), each ``[queue:<id>]`` section defines a queue and each
    ``[agent:<id>]`` section an agent with ``certifications``, ``skill`` and
    ``shift`` (``6-14`` style hour ranges, comma separated).
    """
    parser = configparser.ConfigParser(interpolation=None)
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    sim = dict(parser["simulation"]) if parser.has_section("simulation") else {}
    preset = sim.pop("preset", None)
    seed = int(sim.get("seed", 0))
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}")
        cfg = PRESETS[preset](seed=seed)
    else:
        cfg = None

    queues = []
    agents = []
    for name in parser.sections():
        sec = parser[name]
        if name.startswith("queue:"):
            qid = name.split(":", 1)[1]
            profile = _floats(sec["hourly_profile"]) if "hourly_profile" in sec else (1.0,) * 24
            queues.append(QueueConfig(qid, float(sec["arrival_rate"]),
                                      float(sec["service_time_mean"]), profile))
        elif name.startswith("agent:"):
            aid = name.split(":", 1)[1]
            certs = tuple(c.strip() for c in sec.get("certifications", "").split(",") if c.strip())
            agents.append(AgentConfig(aid, certs, float(sec.get("skill", 0.5)),
                                      _shift(sec.get("shift", "0-24")), _plan(sec.get("plan", ""))))
    if cfg is None:
        if not queues:
            raise ConfigError("config defines no queues and no preset")
        cfg = SimConfig(queues=tuple(queues), agents=tuple(agents))
    else:
        if queues:
            cfg = replace(cfg, queues=tuple(queues))
        if agents:
            cfg = replace(cfg, agents=tuple(agents))

    updates = {}
    for key, raw in sim.items():
        if key not in _SCALARS:
            raise ConfigError(f"unknown simulation key {key!r}")
        current = getattr(cfg, key)
        if isinstance(current, tuple):
            updates[key] = _floats(raw)
        elif isinstance(current, bool):
            updates[key] = raw.strip().lower() in ("1", "true", "yes")
        elif isinstance(current, int):
            updates[key] = int(raw)
        elif isinstance(current, float):
            updates[key] = float(raw)
        else:
            updates[key] = raw.strip()
    cfg = replace(cfg, **updates)
    cfg.validate()
    return cfg


def dump_config(cfg: SimConfig, out: IO[str]) -> None:
    parser = configparser.ConfigParser(interpolation=None)
    sim = {}
    for key in _SCALARS:
        v = getattr(cfg, key)
        sim[key] = ", ".join(repr(x) for x in v) if isinstance(v, tuple) else str(v)
    parser["simulation"] = sim
    for q in cfg.queues:
        parser[f"queue:{q.queue_id}"] = {
            "arrival_rate": repr(q.arrival_rate),
            "service_time_mean": repr(q.service_time_mean),
            "hourly_profile": ", ".join(repr(x) for x in q.hourly_profile),
        }
    for a in cfg.agents:
        parser[f"agent:{a.agent_id}"] = {
            "certifications": ", ".join(a.certifications),
            "skill": repr(a.skill),
            "shift": ", ".join(f"{lo:g}-{hi:g}" for lo, hi in a.shift),
        }
        if a.plan:
            parser[f"agent:{a.agent_id}"]["plan"] = ", ".join(
                f"{lo}-{hi}:{'+'.join(qs)}" for lo, hi, qs in a.plan)
    parser.write(out)
