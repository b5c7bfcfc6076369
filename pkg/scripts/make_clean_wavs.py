#!/usr/bin/env python3
"""Write the tiny placeholder recordings used by the toy clean stage."""
import math
import struct
import wave
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "hmmaug" / "data"
ITEMS = [
    ("clean_001", "namaste aap kaise hain", 220.0),
    ("clean_002", "aaj mausam bahut achchha hai", 180.0),
    ("clean_003", "ham kal phir milenge", 260.0),
]


def main():
    (DATA / "clean").mkdir(exist_ok=True)
    rate = 8000
    lines = []
    for uid, text, freq in ITEMS:
        frames = b"".join(struct.pack("<h", int(3000 * math.sin(2 * math.pi * freq * n / rate)))
                          for n in range(rate // 4))
        with wave.open(str(DATA / "clean" / f"{uid}.wav"), "wb") as w:
            w.setnchannels(1)
            w.setsampwidth(2)
            w.setframerate(rate)
            w.writeframes(frames)
        lines.append(f"{uid}|{text}|clean/{uid}.wav")
    (DATA / "clean.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
