"""Write a small grayscale PNG and report its mean intensity.

The PNG encoder lives here in miniature (header, IHDR, one IDAT, IEND)
so the script stays dependency-free. Pixel values and the compressed
byte stream are fully deterministic.
"""

import struct
import sys
import zlib

WIDTH = 48
HEIGHT = 32


def pixel(x, y):
    return (x * 5 + y * 3) % 256


def chunk(tag, payload):
    crc = zlib.crc32(tag + payload) & 0xFFFFFFFF
    return struct.pack(">I", len(payload)) + tag + payload + struct.pack(">I", crc)


def png_bytes(rows):
    header = struct.pack(">IIBBBBB", WIDTH, HEIGHT, 8, 0, 0, 0, 0)
    raw = b"".join(b"\x00" + bytes(row) for row in rows)  # filter type 0 per row
    return (
        b"\x89PNG\r\n\x1a\n"
        + chunk(b"IHDR", header)
        + chunk(b"IDAT", zlib.compress(raw, 9))
        + chunk(b"IEND", b"")
    )


def main():
    out_path = sys.argv[1] if len(sys.argv) > 1 else "out.png"
    rows = [[pixel(x, y) for x in range(WIDTH)] for y in range(HEIGHT)]
    with open(out_path, "wb") as fh:
        fh.write(png_bytes(rows))
    mean = sum(sum(row) for row in rows) / (WIDTH * HEIGHT)
    print(f"metric: {mean:.3f}")


if __name__ == "__main__":
    main()
