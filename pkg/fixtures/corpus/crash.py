"""Candidate that dies before producing any metric, for failure-path tests."""


def load_settings():
    settings = {"window": 4}
    return settings["normalization"]  # deliberately absent key


def main():
    load_settings()
    print("metric: 1.0")


if __name__ == "__main__":
    main()
