"""Quick check that the extension imports and the headline numbers come out.

    cd crates/python && maturin develop --release && python ../../python/smoke_test.py
"""
import math

import pyaggdiff as ad

L = 2 * math.pi

names = [name for name, _ in ad.presets()]
assert "cosine_exact" in names and "P1" in names, names

k = ad.Kernel.cosine(1, -1.0, L, 32)
assert abs(k.coefficient(1) + math.sqrt(math.pi)) < 1e-12
assert abs(k.h(1.0, 1) + 2.0) < 1e-12
assert k.h(1.0, 2) is None
summary = k.summary(1.0)
assert abs(summary["alpha_star_plus"] - 2.0) < 1e-12, summary

lo, hi = k.eigenvalues(1, 1.0, 0.0, 0.0, 1.0)
assert abs(lo + 1.5) < 1e-12 and abs(hi + 0.5) < 1e-12

cfg = ad.Config.preset("cosine_exact")
pts = cfg.bifurcation_points("gamma")
assert len(pts) == 1 and abs(pts[0]["value"] - 1.0) < 1e-12, pts
assert abs(pts[0]["curvature"] - 2 * math.pi) < 1e-12
assert cfg.stability()["stable"] is not None

rt = ad.Config.from_json(cfg.to_json())
assert rt.to_json() == cfg.to_json()

scalar = ad.Config.from_toml(
    """
[model]
type = "scalar"
sigma = 1.0
L = 6.283185307179586
N = 64

[kernel]
type = "cosine"
m = 1
amplitude = -1.0

[params]
alpha = 2.2
"""
)
sol = scalar.solve("alpha-scalar", 0.25)
assert sol["report"]["converged"], sol["report"]
u = sol["components"][0]
dx = L / len(u)
amp = sum(ui * math.cos(x) for ui, x in zip(u, sol["x"])) * dx / math.sqrt(math.pi)
assert abs(abs(amp) - 0.2332) < 1e-3, amp

run = scalar.simulate(t_end=5.0, dt=0.05)
assert run["max_mass_error"] < 1e-8
assert len(run["samples"]) > 1

try:
    ad.Config.from_json('{"model": {"type": "scalar"}}')
except ValueError as e:
    print("rejected bad config:", e)
else:
    raise AssertionError("bad config accepted")

print("pyaggdiff smoke test ok")
