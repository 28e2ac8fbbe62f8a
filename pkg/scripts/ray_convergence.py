"""Eps-extrapolation residual and ray mass of L1 as the time window grows.

    python3 scripts/ray_convergence.py

Prints, per potential and t_max, the Richardson residual and the mass of |L1|.
The residual does not depend on the window. It stays near 1e-4 for the Gaussian
and above the 1e-3 default tolerance for the Yukawa and the square well, whose
transforms decay slowly along rays. The mass approaches its limit like 1/t_max.
"""

from wavescatter.grids import default_t_grid
from wavescatter.potential_lab import gaussian, square_well, yukawa
from wavescatter.ray_transform import compute_l1, l1_mass

POTENTIALS = {
    "gaussian(1, 1)": gaussian(1.0, 1.0),
    "yukawa(1, 1, 0.1)": yukawa(1.0, 1.0, 0.1),
    "square_well(1, 1)": square_well(1.0, 1.0),
}


def main() -> None:
    print(f"{'potential':20s} {'t_max':>7s} {'residual':>10s} {'mass':>12s}")
    for label, V in POTENTIALS.items():
        for t_max in (25.0, 100.0, 400.0):
            prof = compute_l1(V, t_grid=default_t_grid(t_max=t_max), check=False)
            print(f"{label:20s} {t_max:7.0f} {prof.residual:10.2e} {l1_mass(prof):12.6f}")


if __name__ == "__main__":
    main()
