"""
Slope of the calibration error at zero Mixup
============================================

The t-derivative of ECE at t = 0 is negative (a little Mixup always
helps when rho < 1) and grows in magnitude with p / n.  The MCE
derivative is also negative, but it moves the other way as p / n grows.
"""

from mixcal import experiments as ex

base = ex.TrialConfig(n_l=1000, theta_norm=3.0, trials=50, t_grid=())
rows = ex.sweep_ratio(base, [0.25, 0.5, 1.0, 2.0, 4.0])
print("ratio   rho     dECE/dt      dMCE/dt")
for r in rows:
    print(f"{r.c_ratio:5.2f}  {r.mean_rho:.4f}  {r.mean_derivative:+.6f}  {r.mean_mce_derivative:+.6f}")
