# /// script
# requires-python = ">=3.9"
# dependencies = ["six"]
# ///
"""The one fixture that declares an external package.

Run through the environment manager, the inline metadata above gets the
dependency installed before execution; every other corpus script is
standard library only.
"""

import six


def main():
    print(f"metric: {float(six.PY3)}")


if __name__ == "__main__":
    main()
