"""Candidate that hangs, for exec timeout tests.

Sleeps for an hour by default; pass a number of seconds as the first
argument to shorten the nap for determinism checks.
"""

import sys
import time


def main():
    seconds = float(sys.argv[1]) if len(sys.argv) > 1 else 3600.0
    time.sleep(seconds)
    print("metric: 0.0")


if __name__ == "__main__":
    main()
