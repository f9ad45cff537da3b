#!/usr/bin/env python3
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
"""Materialize MovieLens-100K as u.data / u.item.

grouplens.org is often unreachable from build sandboxes, so the files are
rebuilt from the copy bundled in the RecBole wheel on PyPI. The ratings come
out line-for-line identical to the published u.data; u.item is reconstructed
in the pipe-delimited layout (id|title|release date|video date|url|19 genre
flags) with the release year as the only date information.
"""

import argparse
import glob
import os
import subprocess
import sys
import tempfile
import zipfile

GENRES = [
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy",
    "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
    "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
]
PREFIX = "recbole/dataset_example/ml-100k/"


def find_wheel(workdir):
    cached = glob.glob(os.path.join(workdir, "recbole-*.whl"))
    if cached:
        return cached[0]
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "--quiet",
         "-d", workdir, "recbole"],
        check=True)
    return glob.glob(os.path.join(workdir, "recbole-*.whl"))[0]


def convert_ratings(text):
    out = []
    for line in text.splitlines()[1:]:
        if not line.strip():
            continue
        user, item, rating, ts = line.split("\t")
        out.append(f"{user}\t{item}\t{int(float(rating))}\t{int(float(ts))}")
    return "\n".join(out) + "\n"


def convert_items(text):
    out = []
    for line in text.splitlines()[1:]:
        if not line.strip():
            continue
        item_id, title, year, classes = (line.split("\t") + [""] * 4)[:4]
        flags = ["0"] * len(GENRES)
        for token in classes.split():
            if token in GENRES:
                flags[GENRES.index(token)] = "1"
        if year.isdigit():
            date = f"01-Jan-{year}"
            if f"({year})" not in title:
                title = f"{title} ({year})"
        else:
            date = ""
            if item_id == "267":
                title = "unknown"
                flags = ["1"] + ["0"] * (len(GENRES) - 1)
        out.append("|".join([item_id, title, date, "", ""] + flags))
    return "\n".join(out) + "\n"


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=os.path.join(
        os.path.dirname(os.path.abspath(__file__)), "..", "data", "ml-100k"))
    parser.add_argument("--cache", default=os.path.join(
        tempfile.gettempdir(), "msrec-wheels"))
    args = parser.parse_args()

    out = os.path.abspath(args.out)
    if os.path.exists(os.path.join(out, "u.data")) and os.path.exists(
            os.path.join(out, "u.item")):
        print(f"ml-100k already present in {out}")
        return 0

    os.makedirs(args.cache, exist_ok=True)
    os.makedirs(out, exist_ok=True)
    with zipfile.ZipFile(find_wheel(args.cache)) as wheel:
        ratings = wheel.read(PREFIX + "ml-100k.inter").decode("latin-1")
        items = wheel.read(PREFIX + "ml-100k.item").decode("latin-1")

    for name, body in (("u.data", convert_ratings(ratings)),
                       ("u.item", convert_items(items))):
        tmp = os.path.join(out, name + ".tmp")
        with open(tmp, "w", encoding="latin-1") as f:
            f.write(body)
        os.replace(tmp, os.path.join(out, name))
    print(f"wrote {out}/u.data and {out}/u.item")
    return 0


if __name__ == "__main__":
    sys.exit(main())
