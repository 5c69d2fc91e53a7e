"""Write a synthetic 79-object Kosmos-1408 fragment catalog in TLE format.

The real August 2023 snapshot is not redistributable here, so this produces a
deterministic stand-in with the cloud's broad characteristics: inclination
near 82.56 deg, near-circular orbits between roughly 350 and 900 km altitude,
and node longitudes still clustered about two years after the breakup.
"""

import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from adrplan.orbits import DEFAULT_CONSTANTS, datetime_to_days, format_tle  # noqa: E402

OUT = Path(__file__).resolve().parents[1] / "tests" / "data" / "kosmos1408_synthetic.tle"
COUNT = 79
EPOCH = datetime(2023, 8, 24, 6, 0, tzinfo=timezone.utc)
REFERENCE_PIECES = ["RP", "FT", "RG", "BYD", "JA"]


def piece_codes(count: int) -> list[str]:
    letters = "ABCDEFGHJKLMNPQRSTUVWXYZ"
    pool = [a + b for a in letters for b in letters] + ["B" + a + b for a in letters for b in letters]
    pool = [p for p in pool if p not in REFERENCE_PIECES]
    rng = np.random.default_rng(1408)
    picked = sorted(rng.choice(len(pool), size=count - len(REFERENCE_PIECES), replace=False))
    return REFERENCE_PIECES + [pool[k] for k in picked]


def main() -> None:
    rng = np.random.default_rng(20230824)
    mu, r_e = DEFAULT_CONSTANTS.mu, DEFAULT_CONSTANTS.r_E
    epoch = datetime_to_days(EPOCH)
    altitude_km = np.clip(rng.gamma(4.0, 45.0, COUNT) + 340.0, 340.0, 950.0)
    ecc = rng.uniform(0.0005, 0.012, COUNT)
    inc = 82.56 + rng.normal(0.0, 0.12, COUNT)
    raan = (120.0 + rng.normal(0.0, 12.0, COUNT)) % 360.0
    argp = rng.uniform(0.0, 360.0, COUNT)
    mean_anomaly = rng.uniform(0.0, 360.0, COUNT)
    lines = []
    for k, piece in enumerate(piece_codes(COUNT)):
        a = r_e + altitude_km[k] * 1e3
        rev_per_day = np.sqrt(mu / a**3) * 86400.0 / (2.0 * np.pi)
        lines += format_tle(
            catnum=49800 + k,
            designator=f"82092{piece}",
            epoch=epoch,
            inclination_deg=float(inc[k]),
            raan_deg=float(raan[k]),
            eccentricity=float(ecc[k]),
            argp_deg=float(argp[k]),
            mean_anomaly_deg=float(mean_anomaly[k]),
            mean_motion=float(rev_per_day),
            rev_number=int(rng.integers(1000, 9999)),
            name="COSMOS 1408 DEB",
        )
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
