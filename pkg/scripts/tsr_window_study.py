"""Share of rescaled saliency mass inside the bump window, per base method.

Reports the mean window fraction on channel 0 for class-1 queries (which
carry a bump) and for all queries, and the mean score on the noise channels.
"""
import argparse

import numpy as np

from tsxplain import linear_fit, make_synthetic, train_test_split, tsr
from tsxplain.core import bump_window


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    p.add_argument("--t", type=int, default=50)
    args = p.parse_args()
    lo, hi = bump_window(args.t)
    print(f"window [{lo}, {hi})")
    for seed in args.seeds:
        train, test = train_test_split(make_synthetic("channel_multi", 200, 3, args.t, seed), 50)
        model = linear_fit(train)
        acc = (model.predict(test.X) == test.y).mean()
        for base in tsr.BASE_METHODS:
            bump, every, noise = [], [], []
            for x, y in zip(test.X, test.y):
                s = tsr.explain(x, None, model, tsr.TsrParams(base_method=base)).scores
                f = s[0, lo:hi].sum() / s.sum()
                every.append(f)
                if y == 1:
                    bump.append(f)
                    noise.append(s[1:].mean())
            print(f"seed {seed} acc {acc:.2f} {base:>10}: class-1 {np.mean(bump):.3f}  "
                  f"all {np.mean(every):.3f}  noise {np.mean(noise):.4f}")


if __name__ == "__main__":
    main()
