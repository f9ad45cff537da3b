# Copyright 2026 The msrec Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Writes the small synthetic dataset used by the golden config.

Ratings come from a rank-2 latent model with noise, rounded to 1..5.
The output is committed; rerun only to change the fixture.
"""

import os
import random

N_USERS = 40
N_ITEMS = 60
PER_USER = 24


def main():
    rng = random.Random(20260105)
    here = os.path.dirname(os.path.abspath(__file__))
    users = [(rng.gauss(0, 1), rng.gauss(0, 1)) for _ in range(N_USERS)]
    items = [(rng.gauss(0, 1), rng.gauss(0, 1)) for _ in range(N_ITEMS)]
    bias = [rng.gauss(0, 0.5) for _ in range(N_ITEMS)]
    lines = []
    t = 880000000
    for u in range(N_USERS):
        for i in sorted(rng.sample(range(N_ITEMS), PER_USER)):
            x = 3.4 + bias[i] + 0.6 * (users[u][0] * items[i][0] + users[u][1] * items[i][1])
            r = min(5, max(1, round(x + rng.gauss(0, 0.4))))
            t += rng.randint(1, 5000)
            lines.append(f"{u + 1}\t{i + 1}\t{r}\t{t}\n")
    with open(os.path.join(here, "golden_ratings.tsv"), "w") as f:
        f.writelines(lines)
    with open(os.path.join(here, "golden_items.txt"), "w") as f:
        for i in range(N_ITEMS):
            year = 1965 + rng.randint(0, 35)
            flags = "|".join("0" for _ in range(19))
            f.write(f"{i + 1}|Item {i + 1} ({year})|01-Jan-{year}|||{flags}\n")


if __name__ == "__main__":
    main()
