#!/usr/bin/env python3
"""Materialize MovieLens-100K as u.data / u.item under a target directory.

Tries the GroupLens archive first. When that host is unreachable, falls back
to the copy of ML-100K bundled in the `recbole` wheel (atomic format) and
rewrites it into the original tab/pipe layouts. Ratings are reproduced row
for row; item genre flags are rebuilt from the genre names in canonical order.
"""

import argparse
import io
import pathlib
import subprocess
import sys
import tempfile
import urllib.request
import zipfile

GROUPLENS_URL = "https://files.grouplens.org/datasets/movielens/ml-100k.zip"

GENRES = [
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy",
    "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
    "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
]


def from_grouplens(out: pathlib.Path) -> bool:
    try:
        with urllib.request.urlopen(GROUPLENS_URL, timeout=30) as resp:
            payload = resp.read()
    except OSError:
        return False
    with zipfile.ZipFile(io.BytesIO(payload)) as archive:
        for name in ("u.data", "u.item"):
            (out / name).write_bytes(archive.read(f"ml-100k/{name}"))
    return True


def from_recbole(out: pathlib.Path) -> None:
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "-q",
             "-d", tmp, "recbole==1.2.1"],
            check=True)
        wheel = next(pathlib.Path(tmp).glob("recbole-*.whl"))
        with zipfile.ZipFile(wheel) as archive:
            inter = archive.read(
                "recbole/dataset_example/ml-100k/ml-100k.inter").decode()
            items = archive.read(
                "recbole/dataset_example/ml-100k/ml-100k.item").decode(
                    "latin-1")

    rows = inter.splitlines()[1:]
    with open(out / "u.data", "w", newline="\n") as f:
        for row in rows:
            user, item, rating, stamp = row.split("\t")
            f.write(f"{user}\t{item}\t{int(float(rating))}\t"
                    f"{int(float(stamp))}\n")

    with open(out / "u.item", "w", newline="\n", encoding="latin-1") as f:
        for row in items.splitlines()[1:]:
            fields = row.split("\t")
            item, title, year = fields[0], fields[1], fields[2]
            names = fields[3].split() if len(fields) > 3 else []
            flags = ["1" if g in names else "0" for g in GENRES]
            title = title.replace("|", "/")
            f.write("|".join([item, f"{title} ({year})", "", "", ""] + flags))
            f.write("\n")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data/ml-100k")
    args = parser.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if not from_grouplens(out):
        print("grouplens.org unreachable; using the recbole wheel copy",
              file=sys.stderr)
        from_recbole(out)
    print(f"wrote {out / 'u.data'} and {out / 'u.item'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
