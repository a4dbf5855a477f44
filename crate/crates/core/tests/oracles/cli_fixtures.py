"""Writes the CLI fixture files and the reference values the CLI tests pin.

Run from the repository root: python3 crates/core/tests/oracles/cli_fixtures.py
Reference statistics use numpy (float64 from the stored float32 values) and
scipy.linalg.sqrtm, independent of the Rust implementation.
"""
import json
import struct

import numpy as np
import scipy.linalg

OUT = "fixtures/cli"


def write_afe1(path, rows, tag):
    rows = np.asarray(rows, dtype="<f4")
    n, d = rows.shape
    tag_b = tag.encode()
    with open(path, "wb") as f:
        f.write(b"AFE1")
        f.write(struct.pack("<IQQBI", 1, n, d, 0, len(tag_b)))
        f.write(tag_b)
        f.write(rows.tobytes())
    return rows.astype(np.float64)


def stats(x):
    return x.mean(axis=0), np.cov(x, rowvar=False, ddof=1)


def fid(a, b):
    (ma, sa), (mb, sb) = stats(a), stats(b)
    root = scipy.linalg.sqrtm(sa)
    cross = np.trace(scipy.linalg.sqrtm(root @ sb @ root)).real
    return float(((ma - mb) ** 2).sum() + np.trace(sa) + np.trace(sb) - 2 * cross)


rng = np.random.default_rng(13)
n, d = 400, 4
mix = np.array([[1.0, 0.3, 0.0, 0.0], [0.0, 0.8, 0.2, 0.0], [0.0, 0.0, 1.2, -0.4], [0.1, 0.0, 0.0, 0.6]])
style = write_afe1(f"{OUT}/style.afe", rng.standard_normal((n, d)) @ mix, "fixture:style")
content = write_afe1(f"{OUT}/content.afe", rng.standard_normal((n, d)), "fixture:content")
generated = write_afe1(
    f"{OUT}/generated.afe", 0.7 * content + 0.5 * rng.standard_normal((n, d)) @ mix + 0.25, "fixture:generated"
)

dist = rng.uniform(0.05, 0.6, n).round(6)
with open(f"{OUT}/distances.csv", "w") as f:
    f.write("content_id,generated_id,distance\n")
    for i, v in enumerate(dist):
        f.write(f"c{i:03d},g{i:03d},{v:.6f}\n")

mu, sigma = stats(style)
f_sg = fid(style, generated)
toy = float(np.abs(content - generated).mean(axis=1).mean())
reference = {
    "style_mu": mu.tolist(),
    "style_sigma": sigma.tolist(),
    "fid": f_sg,
    "mean_distance_file": float(dist.mean()),
    "artfid_file": (1 + float(dist.mean())) * (1 + f_sg),
    "mean_distance_toy": toy,
    "artfid_toy": (1 + toy) * (1 + f_sg),
}
with open(f"{OUT}/reference.json", "w") as f:
    json.dump(reference, f, indent=2)
    f.write("\n")
print(json.dumps(reference, indent=2))
