"""Run all four explainers on synthetic data and write JSON + SVG files.

usage: python scripts/run_demo.py [OUTDIR] [--seed N]
"""
import argparse

from tsxplain.cli import run_demo


def main():
    p = argparse.ArgumentParser()
    p.add_argument("outdir", nargs="?", default="demo_out")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    for path in run_demo(args.outdir, args.seed):
        print(path)


if __name__ == "__main__":
    main()
