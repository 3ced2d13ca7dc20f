"""Run every evaluation experiment through the CLI and collect CSV/JSON results.

    python scripts/reproduce_experiments.py results/          # full protocols
    python scripts/reproduce_experiments.py results/ --quick  # minutes-scale smoke run
"""
import argparse
import sys
import time
from pathlib import Path

from irtrack.cli import main


def runs(out: Path, quick: bool, seed: int, jobs: int):
    common = ["--seed", str(seed), "--jobs", str(jobs)]
    acc = ["--reps", "3", "--frames", "30", "--pairs", "2000"] if quick else []
    frames = ["--frames", "10"] if quick else []
    bench = ["--frames", "500"] if quick else []
    noise = ["--depths", "12", "--frames", "30"] if quick else []
    return {
        "accuracy": ["accuracy", *acc, "--out", str(out / "accuracy.csv"),
                     "--summary", str(out / "accuracy.json"), *common],
        "sweep_z": ["sweep", "--axis", "z", *frames, "--out", str(out / "sweep_z.csv"),
                    "--summary", str(out / "sweep_z.json"), *common],
        "sweep_x": ["sweep", "--axis", "x", "--step", "5", "--frames", "10",
                    "--out", str(out / "sweep_x.csv"), "--summary", str(out / "sweep_x.json"),
                    *common],
        "bench": ["bench", *bench, "--out", str(out / "bench.csv"),
                  "--summary", str(out / "bench.json"), *common],
        "latency": ["latency", "--out", str(out / "latency.csv"),
                    "--summary", str(out / "latency.json"), *common],
        "noise": ["noise-fit", *noise, "--out", str(out / "noise.csv"),
                  "--summary", str(out / "noise.json"), *common],
        "noise_gaussian": ["noise-fit", "--frames", "20", "--no-quantize",
                           "--out", str(out / "noise_gaussian.csv"),
                           "--summary", str(out / "noise_gaussian.json"), *common],
    }


def cli():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("out", type=Path)
    p.add_argument("--quick", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--only", nargs="*", help="subset of experiment names")
    args = p.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    status = 0
    for name, argv in runs(args.out, args.quick, args.seed, args.jobs).items():
        if args.only and name not in args.only:
            continue
        t0 = time.perf_counter()
        code = main(argv)
        print(f"{name:15s} exit {code}  {time.perf_counter() - t0:7.1f} s")
        status = status or code
    return status


if __name__ == "__main__":
    sys.exit(cli())
