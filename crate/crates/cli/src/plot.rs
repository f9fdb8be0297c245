//! Matplotlib scripts dropped next to each output; run them from the output directory.

pub const RUN_SCRIPT: &str = r#"import glob
import re

import matplotlib.pyplot as plt
import numpy as np

m = np.genfromtxt("metrics.csv", delimiter=",", names=True)
fig, axes = plt.subplots(1, 2, figsize=(10, 4))
for ax, col in zip(axes, ["kl", "trace_error"]):
    ok = np.isfinite(m[col])
    if ok.any():
        ax.semilogy(m["iteration"][ok], m[col][ok])
    ax.set_xlabel("iteration")
    ax.set_title(col)
fig.tight_layout()
fig.savefig("metrics.png", dpi=150)

snaps = sorted(glob.glob("snapshot_*.txt"), key=lambda p: int(re.findall(r"\d+", p)[0]))
if snaps:
    fig, axes = plt.subplots(1, len(snaps), figsize=(4 * len(snaps), 4), squeeze=False)
    for ax, path in zip(axes[0], snaps):
        x = np.atleast_2d(np.loadtxt(path))
        if x.shape[1] >= 2:
            ax.scatter(x[:, 0], x[:, 1], s=4)
        else:
            ax.hist(x[:, 0], bins=40)
        ax.set_title(path[:-4])
    fig.tight_layout()
    fig.savefig("snapshots.png", dpi=150)
"#;

pub const SWEEP_SCRIPT: &str = r#"import matplotlib.pyplot as plt
import numpy as np

d = np.genfromtxt("sweep.csv", delimiter=",", names=True)
a = np.unique(d["a"])
eta = np.unique(d["eta"])
err = d["error_or_sentinel"].reshape(len(a), len(eta))
err = np.where(np.isfinite(err), err, np.nan)
fig, ax = plt.subplots(figsize=(6, 5))
mesh = ax.pcolormesh(eta, a, np.log10(err + 1e-300), shading="auto")
ax.plot(eta, 2.0 / eta, "w--", lw=1)
ax.set_xscale("log")
ax.set_yscale("log")
ax.set_ylim(a.min(), a.max())
ax.set_xlabel("eta")
ax.set_ylabel("a")
fig.colorbar(mesh, label="log10 error (blank = diverged)")
fig.tight_layout()
fig.savefig("sweep.png", dpi=150)
"#;

pub const THEORY_SCRIPT: &str = r#"import matplotlib.pyplot as plt
import numpy as np

d = np.genfromtxt("theory.csv", delimiter=",", names=True, dtype=None, encoding="utf-8")
d = np.atleast_1d(d)
fig, ax = plt.subplots(figsize=(5, 4))
ax.plot(d["t"], d["arwp_rate"], "o-", label="ARWP")
ax.plot(d["t"], d["klmc_rate"], "s--", label="KLMC")
ax.set_xlabel("T")
ax.set_ylabel("contraction factor")
ax.legend()
fig.tight_layout()
fig.savefig("theory.png", dpi=150)
"#;
