"""Recover the integer shift between a synthetic image pair.

The moving image is the reference rolled by a known offset with
wraparound, so exhaustive correlation must find that offset exactly and
the reported registration error is 0.0. No randomness, no dependencies.
"""

WIDTH = 32
HEIGHT = 24
TRUE_SHIFT = (3, -2)
SEARCH_RADIUS = 4


def reference_image():
    return [
        [(x * 7 + y * 13 + (x * y) % 11) % 97 for x in range(WIDTH)]
        for y in range(HEIGHT)
    ]


def roll(img, dx, dy):
    height, width = len(img), len(img[0])
    return [
        [img[(y - dy) % height][(x - dx) % width] for x in range(width)]
        for y in range(height)
    ]


def correlation(a, b):
    return sum(
        va * vb for row_a, row_b in zip(a, b) for va, vb in zip(row_a, row_b)
    )


def estimate_shift(fixed, moving, radius=SEARCH_RADIUS):
    best_key = None
    best_shift = (0, 0)
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            score = correlation(fixed, roll(moving, -dx, -dy))
            # prefer the smaller displacement on equal correlation
            key = (score, -(dx * dx + dy * dy))
            if best_key is None or key > best_key:
                best_key = key
                best_shift = (dx, dy)
    return best_shift


def main():
    fixed = reference_image()
    moving = roll(fixed, *TRUE_SHIFT)
    dx, dy = estimate_shift(fixed, moving)
    error = abs(dx - TRUE_SHIFT[0]) + abs(dy - TRUE_SHIFT[1])
    print(f"metric: {float(error)}")


if __name__ == "__main__":
    main()
