"""Regenerate the example scene scripts in this directory."""
from pathlib import Path

from memslidar.presets import make_scene

HERE = Path(__file__).resolve().parent

EXAMPLES = [
    ("crossing-1.json", dict(layout="crossing-1", num_persons=5, num_frames=50, seed=1)),
    ("crossing-2.json", dict(layout="crossing-2", num_persons=8, num_frames=50, seed=2)),
    ("crossing-3.json", dict(layout="crossing-3", num_persons=10, num_frames=50, seed=3)),
    ("pathway.json", dict(layout="pathway", num_persons=3, num_frames=50, seed=4)),
    # full-size dataset script: 2100 frames at 10 Hz
    ("dataset-2100.json", dict(layout="crossing-1", num_persons=7, num_frames=2100, seed=2100)),
]

if __name__ == "__main__":
    for name, kw in EXAMPLES:
        make_scene(**kw).save(HERE / name)
        print(name)
