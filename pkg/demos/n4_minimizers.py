"""N = 4 local minimizers of I and J and a W-path sweep over the cut-off index.

Prints the minimizer summaries and, for each n, the path maximum against the
threshold m_bar + Lambda.
"""

import argparse

from kirchnorm import ProblemParams, functionals as fn, scalar, solver


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--bfrac", type=float, default=0.5, help="b in units of S^-2")
    ap.add_argument("--cfrac", type=float, default=0.5, help="c in units of c0")
    ap.add_argument("--mu", type=float, default=1.0)
    ap.add_argument("--q", type=float, default=2.5)
    args = ap.parse_args()

    S = scalar.sobolev_constant(4)
    p = ProblemParams(4, b=args.bfrac * S**-2, mu=args.mu, q=args.q)
    th = scalar.thresholds(p, C_q=fn.gn_constant(4, args.q))
    p = p.replace(c=args.cfrac * th.c0)
    print(f"c0 = {th.c0:.6g}, k0 = {th.k0:.6g}, Lambda = {th.Lambda:.6g}")

    rI = solver.local_minimizer(p, "I")
    rJ = solver.local_minimizer(p, "J")
    for name, r in (("I", rI), ("J", rJ)):
        s = r.summary()
        print(f"{name}: energy {s['energy']:.8g}  grad2 {s['tuple']['grad2']:.6g}  "
              f"lambda {s['multiplier']:.6g}  iters {s['iters']}  residual {s['el_residual']:.2e}")

    print(" n     sup I(W)      threshold     margin")
    for n in (25, 50, 100, 200):
        path = solver.mp_path_W(p, rJ, n=n, m_c=rI.energy)
        c = path.comparison
        print(f"{n:3d}  {path.sup_level:12.6f}  {c['threshold']:12.6f}  {c['margin']:.4f}")
    lo, lo_s = solver.boundary_barrier(p)
    print(f"boundary barrier: analytic {lo:.6g}, sampled {lo_s:.6g}")


if __name__ == "__main__":
    main()
