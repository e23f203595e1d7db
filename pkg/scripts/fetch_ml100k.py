"""Fetch MovieLens-100K and write it as ``user::item::rating::timestamp`` lines.

The ratings are taken from the example data bundled in the ``recbole`` wheel
(fetched with ``pip download``, nothing is installed), since grouplens.org is
not always reachable. Usage::

    python scripts/fetch_ml100k.py [--out data/ml-100k.dat]
"""
import argparse
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

MEMBER = "recbole/dataset_example/ml-100k/ml-100k.inter"
DEFAULT_OUT = Path(__file__).resolve().parents[1] / "data" / "ml-100k.dat"


def fetch(out: Path = DEFAULT_OUT) -> Path:
    if out.exists():
        return out
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "-d", tmp, "recbole==1.2.1"],
            check=True,
        )
        wheel = next(Path(tmp).glob("recbole-*.whl"))
        lines = zipfile.ZipFile(wheel).read(MEMBER).decode("utf-8").splitlines()
    rows = [line.split("\t") for line in lines[1:] if line.strip()]
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("".join(f"{u}::{i}::{int(float(r))}::{int(float(t))}\n" for u, i, r, t in rows))
    return out


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    path = fetch(ap.parse_args().out)
    print(f"{sum(1 for _ in open(path))} ratings -> {path}")
