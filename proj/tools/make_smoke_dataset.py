#!/usr/bin/env python3
"""Writes data/diabetes_schema_smoke.csv: 442 synthetic rows with the column layout of the
Efron et al. diabetes data (age, sex, bmi, bp, s1..s6, target).

The values are drawn from a fixed-seed generator with marginals roughly like the public data;
the response depends on bmi, bp, s3 and s5 only. Output is byte-identical across runs.
"""

import random
import sys
from pathlib import Path

ROWS = 442
SEED = 20230815


def main(out: Path) -> None:
    rng = random.Random(SEED)
    lines = ["age,sex,bmi,bp,s1,s2,s3,s4,s5,s6,target"]
    for _ in range(ROWS):
        age = min(79, max(19, round(rng.gauss(48.5, 13.1))))
        sex = 1 + (rng.random() < 0.47)
        bmi = rng.gauss(26.4, 4.4)
        bp = rng.gauss(94.6, 13.8)
        s1 = rng.gauss(189.1, 34.6)
        s3 = max(22.0, rng.gauss(49.8, 12.9))
        s2 = 0.9 * s1 - 0.6 * s3 + rng.gauss(0, 14.0)
        s4 = s1 / s3
        s5 = rng.gauss(4.64, 0.52)
        s6 = 91.3 + 0.35 * (bmi - 26.4) + rng.gauss(0, 11.0)
        z = lambda v, mu, sd: (v - mu) / sd  # noqa: E731
        y = (152.1 + 26.0 * z(bmi, 26.4, 4.4) + 15.0 * z(bp, 94.6, 13.8)
             - 11.0 * z(s3, 49.8, 12.9) + 23.0 * z(s5, 4.64, 0.52) + rng.gauss(0, 48.0))
        row = [age, sex, bmi, bp, s1, s2, s3, s4, s5, s6, y]
        lines.append(",".join(str(v) if isinstance(v, int) else f"{v:.4f}" for v in row))
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data" / "diabetes_schema_smoke.csv")
