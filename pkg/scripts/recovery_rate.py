"""Error of a recovered Fourier coefficient against the averaging length.

Q(t) = 2 a cos(2 pi omega t) + bounded stationary noise; the RMS error over
seeds of the estimate of a is printed per T_avg with the log-log slope.
"""
import argparse

import numpy as np

from isotorus import frequency as fq
from isotorus.potential import fourier_recover


def error(f, T, seed, amp, noise, h=0.01):
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, T, int(round(T / h)) + 1)
    cells = rng.uniform(-1.0, 1.0, int(T) + 2)
    Q = 2 * amp * np.cos(2 * np.pi * f.vector[0] * t)
    Q = Q + noise * cells[np.floor(t + rng.uniform()).astype(int)]
    return abs(fourier_recover(t, Q, f, (1,), check_band=False).estimate - amp)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--T", type=float, nargs="+", default=[1e2, 1e3, 1e4])
    ap.add_argument("--seeds", type=int, default=40)
    ap.add_argument("--amp", type=float, default=0.3)
    ap.add_argument("--noise", type=float, default=0.5)
    args = ap.parse_args()
    f = fq.Frequency.parse(["(sqrt(5)-1)/2"], b0=2.0)
    rms = []
    for T in args.T:
        e = [error(f, T, s, args.amp, args.noise) for s in range(args.seeds)]
        rms.append(float(np.sqrt(np.mean(np.square(e)))))
        print(f"T_avg {T:10.0f}  rms error {rms[-1]:.4e}")
    if len(rms) > 1:
        print(f"slope {np.polyfit(np.log(args.T), np.log(rms), 1)[0]:.3f}")


if __name__ == "__main__":
    main()
