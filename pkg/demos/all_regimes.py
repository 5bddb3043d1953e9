"""Verify the default sample of every regime and print one line per check."""

import argparse

from kirchnorm import verify


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--depth", choices=("quick", "full"), default="quick")
    args = ap.parse_args()
    for name in ("th2.1i", "th2.1ii", "th2.1iii", "th2.3", "th2.4", "th2.6", "th2.7"):
        rep = verify.verify(verify.default_sample(name), args.depth)
        print(f"== {rep.regime_tag}: {rep.reason}")
        for c in rep.checks:
            print(f"   {c.status:<8} {c.name:<34} {c.relation}")


if __name__ == "__main__":
    main()
