"""Synthetic transaction generator with planted churn dynamics.

Users walk a daily Markov chain ENGAGED -> LAPSING -> CHURNED (absorbing).
``signal_strength`` s controls how visible churn is before it happens: a
departing ENGAGED user routes through LAPSING with probability s (gradual,
observable) and jumps straight to CHURNED otherwise (abrupt, invisible).
LAPSING keeps the user's normal activity rate for ``plateau_days``, then the
rate decays geometrically by factor (1 - collapse_scale * s) per day, and
transaction amounts shift by the configured contrast. At s = 0 LAPSING is
never entered, so behavior carries no advance signal at all.

Per-user randomness comes from ``default_rng((seed, user_id))``, so output
is independent of generation order and any user's stream can be replayed.
"""

import csv
from dataclasses import dataclass

import numpy as np

from churnforge.errors import ConfigError, DataError
from churnforge.data.level01 import day_to_date, date_to_day
from churnforge.data.schema import default_schema

STATE_ENGAGED, STATE_LAPSING, STATE_CHURNED = 0, 1, 2
STATE_NAMES = ("ENGAGED", "LAPSING", "CHURNED")

_EMISSION_KEYS = (
    "txn_intensity", "entry_prob", "deposit_prob", "withdraw_prob",
    "win_prob", "promo_prob", "amount_mu", "amount_sigma",
    "n_match", "n_session",
)


def _default_emission(signal_strength, amount_contrast):
    engaged = dict(
        txn_intensity=1.2,
        entry_prob=0.75,
        deposit_prob=0.25,
        withdraw_prob=0.08,
        win_prob=0.45,
        promo_prob=0.10,
        amount_mu=3.0,
        amount_sigma=0.6,
        n_match=12,
        n_session=4,
    )
    lapsing = dict(engaged)
    lapsing["amount_mu"] = engaged["amount_mu"] - amount_contrast * signal_strength
    lapsing["win_prob"] = engaged["win_prob"] * (1 - 0.3 * signal_strength)
    return {"engaged": engaged, "lapsing": lapsing}


@dataclass
class BehaviorConfig:
    n_users: int = 2000
    start_day: int = 19700  # 2023-12-09
    n_days: int = 75
    seed: int = 0
    signal_strength: float = 1.0
    engaged_rate: tuple = (0.7, 0.7)  # per-user uniform range of daily activity
    churn_hazard: float = 0.012  # P(leave ENGAGED) per day
    lapse_hazard: float = 0.11  # P(LAPSING -> CHURNED) per day
    plateau_days: int = 4  # lapse days at full rate before the collapse
    collapse_scale: float = 0.85  # per-day rate decay is 1 - collapse_scale * s
    amount_contrast: float = 0.8  # log-amount shift while LAPSING, at s = 1
    initial_state_probs: tuple = (1.0, 0.0, 0.0)
    emission: dict = None
    transition_matrix: list = None  # derived from hazards unless given

    def __post_init__(self):
        if self.n_users < 1 or self.n_days < 1:
            raise ConfigError("n_users and n_days must be positive")
        s = self.signal_strength
        if not 0.0 <= s <= 1.0:
            raise ConfigError(f"signal_strength must be in [0, 1], got {s}")
        lo, hi = self.engaged_rate
        if not (0.0 < lo <= hi <= 1.0):
            raise ConfigError(f"engaged_rate range must satisfy 0 < lo <= hi <= 1")
        for name, p in (("churn_hazard", self.churn_hazard),
                        ("lapse_hazard", self.lapse_hazard)):
            if not 0.0 <= p < 1.0:
                raise ConfigError(f"{name} must be in [0, 1), got {p}")
        if self.plateau_days < 0:
            raise ConfigError("plateau_days must be >= 0")
        if not 0.0 <= self.collapse_scale < 1.0:
            raise ConfigError("collapse_scale must be in [0, 1)")
        probs = np.asarray(self.initial_state_probs, dtype=np.float64)
        if probs.shape != (3,) or probs.min() < 0 or abs(probs.sum() - 1) > 1e-9:
            raise ConfigError("initial_state_probs must be 3 probabilities summing to 1")
        if self.transition_matrix is None:
            h, g = self.churn_hazard, self.lapse_hazard
            self.transition_matrix = [
                [1 - h, h * s, h * (1 - s)],
                [0.0, 1 - g, g],
                [0.0, 0.0, 1.0],
            ]
        T = np.asarray(self.transition_matrix, dtype=np.float64)
        if T.shape != (3, 3) or T.min() < -1e-12:
            raise ConfigError("transition matrix must be 3x3 non-negative")
        if np.abs(T.sum(axis=1) - 1).max() > 1e-9:
            raise ConfigError("transition matrix rows must sum to 1")
        if not (T[2, 2] == 1.0 and T[2, 0] == 0.0 and T[2, 1] == 0.0):
            raise ConfigError("CHURNED must be absorbing")
        if self.emission is None:
            self.emission = _default_emission(s, self.amount_contrast)
        for state in ("engaged", "lapsing"):
            params = self.emission.get(state)
            if params is None or set(params) != set(_EMISSION_KEYS):
                raise ConfigError(
                    f"emission[{state!r}] must define exactly {_EMISSION_KEYS}"
                )
            for key in ("entry_prob", "deposit_prob", "withdraw_prob",
                        "win_prob", "promo_prob"):
                if not 0.0 <= params[key] <= 1.0:
                    raise ConfigError(f"emission {state}.{key} must be in [0, 1]")
            if params["txn_intensity"] < 0 or params["amount_sigma"] < 0:
                raise ConfigError("txn_intensity and amount_sigma must be >= 0")
            if params["n_match"] < 1 or params["n_session"] < 1:
                raise ConfigError("n_match and n_session must be >= 1")

    # --- activity model -------------------------------------------------
    def lapse_rate_factor(self, age):
        """Activity-rate multiplier for a LAPSING user ``age`` days in."""
        age = np.asarray(age)
        past = np.maximum(age + 1 - self.plateau_days, 0)
        decay = 1.0 - self.collapse_scale * self.signal_strength
        return np.where(age < self.plateau_days, 1.0, decay**past)

    def activity_rate(self, state, age, base_rate):
        if state == STATE_ENGAGED:
            return base_rate
        if state == STATE_LAPSING:
            return base_rate * float(self.lapse_rate_factor(age))
        return 0.0

    # --- serialization ---------------------------------------------------
    def to_dict(self):
        return {
            "n_users": self.n_users,
            "start_day": self.start_day,
            "n_days": self.n_days,
            "seed": self.seed,
            "signal_strength": self.signal_strength,
            "engaged_rate": list(self.engaged_rate),
            "churn_hazard": self.churn_hazard,
            "lapse_hazard": self.lapse_hazard,
            "plateau_days": self.plateau_days,
            "collapse_scale": self.collapse_scale,
            "amount_contrast": self.amount_contrast,
            "initial_state_probs": list(self.initial_state_probs),
            "emission": self.emission,
            "transition_matrix": self.transition_matrix,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("engaged_rate", "initial_state_probs"):
            if key in d:
                d[key] = tuple(d[key])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(f"bad generator config: {exc}") from exc


def default_config(**overrides):
    return BehaviorConfig(**overrides)


def nonlinear_temporal_config(**overrides):
    """Config whose churn signal lives in within-window dynamics only.

    LAPSING emissions are identical to ENGAGED ones, so per-transaction
    columns carry no state information; the only signal is the timing of
    the activity collapse, and heterogeneous base rates mask its footprint
    in window-mean activity. Window statistics (Level-02) are nearly blind
    here while sequence models that see daily ordering are not.
    """
    s = overrides.get("signal_strength", 0.6)
    emission = _default_emission(s, 0.0)
    emission["lapsing"] = dict(emission["engaged"])
    params = dict(
        signal_strength=s,
        engaged_rate=(0.35, 0.9),
        amount_contrast=0.0,
        churn_hazard=0.02,
        lapse_hazard=0.08,
        emission=emission,
    )
    params.update(overrides)
    return BehaviorConfig(**params)


# --- simulation ----------------------------------------------------------

def _user_rng(config, user_id):
    return np.random.default_rng((config.seed, user_id))


def _simulate_user(config, user_id):
    """Hidden states, lapse ages and realized activity for one user.

    Returns (rng, base_rate, states, ages, active); the rng has consumed the
    latent draws and is positioned for emission sampling.
    """
    rng = _user_rng(config, user_id)
    n = config.n_days
    base_rate = rng.uniform(*config.engaged_rate)
    u0 = rng.random()
    s = config.signal_strength
    h, g = config.churn_hazard, config.lapse_hazard

    states = np.full(n, STATE_CHURNED, dtype=np.int8)
    ages = np.zeros(n, dtype=np.int64)
    p_e, p_l = config.initial_state_probs[0], config.initial_state_probs[1]
    if u0 < p_e:
        leave = int(rng.geometric(h)) if h > 0 else n + 1
        via_lapse = rng.random() < s
        dur = int(rng.geometric(g)) if g > 0 else n + 1
        states[:min(leave, n)] = STATE_ENGAGED
        if via_lapse and leave < n:
            end = min(leave + dur, n)
            states[leave:end] = STATE_LAPSING
            ages[leave:end] = np.arange(end - leave)
    elif u0 < p_e + p_l:
        dur = int(rng.geometric(g)) if g > 0 else n + 1
        end = min(dur, n)
        states[:end] = STATE_LAPSING
        ages[:end] = np.arange(end)

    prob = np.zeros(n)
    prob[states == STATE_ENGAGED] = base_rate
    lapsing = states == STATE_LAPSING
    prob[lapsing] = base_rate * config.lapse_rate_factor(ages[lapsing])
    active = rng.random(n) < prob
    return rng, base_rate, states, ages, active


def _simulate_population(config, n_users=None):
    """Latents for all users: (rates, states, ages, active) arrays."""
    n_users = config.n_users if n_users is None else n_users
    rates = np.empty(n_users)
    states = np.empty((n_users, config.n_days), dtype=np.int8)
    ages = np.empty((n_users, config.n_days), dtype=np.int64)
    active = np.empty((n_users, config.n_days), dtype=bool)
    for uid in range(n_users):
        _, rates[uid], states[uid], ages[uid], active[uid] = _simulate_user(
            config, uid
        )
    return rates, states, ages, active


# --- emission ------------------------------------------------------------

@dataclass
class GenerationSummary:
    n_users: int
    n_transactions: int
    transactions_path: str
    ground_truth_path: str


def generate(config, transactions_path, ground_truth_path):
    """Writes the transactions CSV and ground-truth CSV for a config."""
    schema = default_schema()
    em = config.emission
    txn_id = 0
    n_txns = 0
    with open(transactions_path, "w", newline="", encoding="utf-8") as tfh, \
            open(ground_truth_path, "w", newline="", encoding="utf-8") as gfh:
        twr = csv.writer(tfh, lineterminator="\n")
        gwr = csv.writer(gfh, lineterminator="\n")
        twr.writerow(schema.header())
        gwr.writerow(["user_id", "date", "state"])
        for uid in range(config.n_users):
            rng, _, states, ages, active = _simulate_user(config, uid)
            for d in range(config.n_days):
                gwr.writerow(
                    [uid, day_to_date(config.start_day + d).isoformat(),
                     STATE_NAMES[states[d]]]
                )
            day_idx = np.flatnonzero(active)
            if day_idx.size == 0:
                continue
            day_state = states[day_idx]
            lam = np.where(
                day_state == STATE_LAPSING,
                em["lapsing"]["txn_intensity"],
                em["engaged"]["txn_intensity"],
            )
            counts = 1 + rng.poisson(lam)
            days = np.repeat(day_idx, counts)
            st = np.repeat(day_state, counts)
            n = days.size
            second = rng.integers(0, 86400, n)

            def par(key):
                return np.where(
                    st == STATE_LAPSING, em["lapsing"][key], em["engaged"][key]
                )

            entry = rng.random(n) < par("entry_prob")
            entry_fee = np.where(
                entry, rng.lognormal(par("amount_mu"), par("amount_sigma"), n), 0.0
            )
            match_id = np.where(
                entry, rng.integers(1, em["engaged"]["n_match"] + 1, n), 0
            )
            is_win = entry & (rng.random(n) < par("win_prob"))
            winnings = np.where(
                is_win,
                rng.lognormal(par("amount_mu") + 0.5, par("amount_sigma"), n),
                0.0,
            )
            deposit = np.where(
                rng.random(n) < par("deposit_prob"),
                rng.lognormal(par("amount_mu") + 0.3, par("amount_sigma"), n),
                0.0,
            )
            withdrawal = np.where(
                rng.random(n) < par("withdraw_prob"),
                rng.lognormal(par("amount_mu"), par("amount_sigma"), n),
                0.0,
            )
            session_id = rng.integers(1, em["engaged"]["n_session"] + 1, n)
            is_promo = (rng.random(n) < par("promo_prob")).astype(float)
            balance = deposit + winnings - entry_fee - withdrawal

            order = np.lexsort((second, days))
            cols = np.column_stack(
                [deposit, entry_fee, winnings, withdrawal,
                 entry.astype(float), match_id.astype(float),
                 session_id.astype(float), balance,
                 is_win.astype(float), is_promo, np.ones(n)]
            )[order]
            ts = (config.start_day + days[order]) * 86400 + second[order]
            for i in range(n):
                txn_id += 1
                twr.writerow(
                    [txn_id, uid, int(ts[i]), *[repr(float(v)) for v in cols[i]]]
                )
            n_txns += n
    return GenerationSummary(
        n_users=config.n_users,
        n_transactions=n_txns,
        transactions_path=str(transactions_path),
        ground_truth_path=str(ground_truth_path),
    )


def load_ground_truth(path):
    """Returns (user_ids, states int8 matrix, start_day)."""
    per_user = {}
    start = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["user_id", "date", "state"]:
            raise DataError(f"{path}: not a ground-truth file")
        for row in reader:
            uid, day, state = int(row[0]), date_to_day(row[1]), row[2]
            per_user.setdefault(uid, []).append((day, STATE_NAMES.index(state)))
    users = sorted(per_user)
    n_days = len(per_user[users[0]])
    states = np.empty((len(users), n_days), dtype=np.int8)
    for i, uid in enumerate(users):
        seq = sorted(per_user[uid])
        if start is None:
            start = seq[0][0]
        states[i] = [st for _, st in seq]
    return np.asarray(users), states, start
