#!/usr/bin/env python3
"""Generate input files for CLI experiments into ./fixtures/.

Creates a diagonally dominant linear-system file, a body file for the
gravitational demo, and a random colour test image.
"""

import argparse
from pathlib import Path

import numpy as np

from procnet.bench import jacobi, nbody
from procnet.ppm import write_ppm


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dest", default="fixtures")
    parser.add_argument("--jacobi-n", type=int, default=512)
    parser.add_argument("--bodies", type=int, default=256)
    parser.add_argument("--image-size", type=int, default=256)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    dest = Path(args.dest)
    dest.mkdir(parents=True, exist_ok=True)

    systems = [jacobi.generate_system(args.jacobi_n, args.seed)]
    jacobi.write_systems(dest / f"jacobi_{args.jacobi_n}.txt", systems)

    mass, pos, vel = nbody.make_bodies(args.bodies, args.seed)
    nbody.write_bodies(dest / f"bodies_{args.bodies}.txt", mass, pos, vel)

    rng = np.random.Generator(np.random.PCG64(args.seed))
    img = rng.integers(0, 256, (args.image_size, args.image_size, 3),
                       dtype=np.uint8)
    write_ppm(dest / f"test_{args.image_size}.ppm", img)

    for f in sorted(dest.iterdir()):
        print(f"{f} ({f.stat().st_size} bytes)")


if __name__ == "__main__":
    main()
