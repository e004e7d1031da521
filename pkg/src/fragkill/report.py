"""Figure rendering for experiment outputs.

Reads the delimited files written by the CLI and drops PNG figures next
to them (or into --out-dir).  Pure presentation: no statistics are
computed here beyond what the CSV already carries.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .errors import ConfigError  # noqa: E402


def _read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows:
        raise ConfigError(f"empty CSV: {path}")
    return rows[0], rows[1:]


def _col(header, rows, name, cast=float):
    idx = header.index(name)
    out = []
    for r in rows:
        v = r[idx]
        out.append(cast(v) if v != "" else math.nan)
    return out


def _save(fig, out: Path) -> Path:
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def _fig_extinction(header, rows, stem, out_dir):
    x = _col(header, rows, "x")
    g = _col(header, rows, "g_hat")
    se = _col(header, rows, "stderr")
    g2 = _col(header, rows, "g_hat_2T")
    iso = _col(header, rows, "g_iso")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(x, g, yerr=[3 * s for s in se], fmt="o", capsize=3,
                label="extinct by T (3 SE)")
    ax.plot(x, g2, "s", mfc="none", label="extinct by 2T")
    ax.plot(x, iso, "-", color="gray", label="isotonized")
    ax.set_xlabel("barrier offset x")
    ax.set_ylabel("extinction frequency")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    return [_save(fig, out_dir / f"{stem}_extinction_curve.png")]


def _fig_spine_survival(header, rows, stem, out_dir):
    x = _col(header, rows, "x")
    analytic = _col(header, rows, "analytic")
    mc = _col(header, rows, "mc_freq")
    se = _col(header, rows, "stderr")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(x, analytic, "k-", label="scale-function value")
    ax.errorbar(x, mc, yerr=[3 * s for s in se], fmt="o", capsize=3,
                label="MC survival (3 SE)")
    ax.set_xlabel("start offset x")
    ax.set_ylabel("never-passage probability")
    ax.legend()
    return [_save(fig, out_dir / f"{stem}_first_passage.png")]


def _fig_martingales(header, rows, stem, out_dir):
    made = []
    kinds = sorted({r[header.index("kind")] for r in rows})
    for kind in kinds:
        sub = [r for r in rows if r[header.index("kind")] == kind]
        ts = _col(header, sub, "t")
        means = _col(header, sub, "mean")
        ses = _col(header, sub, "stderr")
        targets = _col(header, sub, "target")
        ps = [r[header.index("p")] for r in sub]
        fig, ax = plt.subplots(figsize=(6, 4))
        for p in sorted(set(ps)):
            pts = [(t, m, s, g) for t, m, s, g, pp in
                   zip(ts, means, ses, targets, ps) if pp == p]
            pts.sort()
            label = kind if p in ("", "nan") else f"{kind}, p={p}"
            ax.errorbar([q[0] for q in pts], [q[1] for q in pts],
                        yerr=[3 * q[2] for q in pts], fmt="o-", capsize=3,
                        label=label)
            ax.plot([q[0] for q in pts], [q[3] for q in pts], "k--", lw=0.8)
        ax.set_xlabel("t")
        ax.set_ylabel("sample mean (3 SE)")
        ax.legend()
        made.append(_save(fig, out_dir / f"{stem}_{kind}_means.png"))
    return made


def _fig_decay(header, rows, stem, out_dir):
    sub = [r for r in rows if r[header.index("statistic")] == "killed_median"]
    ts = _col(header, sub, "t")
    vals = _col(header, sub, "value")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ts, vals, "o-", label="median -log lambda1 / t")
    ax.set_xlabel("t")
    ax.set_ylabel("decay-rate estimate")
    ax.legend()
    return [_save(fig, out_dir / f"{stem}_decay_rate.png")]


def _fig_growth(header, rows, stem, out_dir):
    ts = _col(header, rows, "t")
    med = _col(header, rows, "median_N")
    q25 = _col(header, rows, "q25")
    q75 = _col(header, rows, "q75")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.fill_between(ts, q25, q75, alpha=0.3, label="interquartile")
    ax.plot(ts, med, "o-", label="median block count")
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("surviving block count")
    ax.legend()
    return [_save(fig, out_dir / f"{stem}_population_growth.png")]


def _fig_many_to_one(header, rows, stem, out_dir):
    ts = _col(header, rows, "t")
    lhs = _col(header, rows, "lhs_mean")
    lse = _col(header, rows, "lhs_se")
    rhs = _col(header, rows, "rhs_mean")
    rse = _col(header, rows, "rhs_se")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(ts, lhs, yerr=[3 * s for s in lse], fmt="o", capsize=3,
                label="population side (3 SE)")
    ax.errorbar(ts, rhs, yerr=[3 * s for s in rse], fmt="s", capsize=3,
                label="spine side (3 SE)")
    ax.set_xlabel("t")
    ax.set_ylabel("mass-weighted mean")
    ax.legend()
    return [_save(fig, out_dir / f"{stem}_many_to_one.png")]


def _fig_compute(json_path: Path, stem, out_dir):
    with open(json_path, encoding="utf-8") as fh:
        payload = json.load(fh)
    made = []
    if payload.get("phi"):
        ps = [q[0] for q in payload["phi"]]
        vals = [q[1] for q in payload["phi"]]
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(ps, vals, "o-")
        ax.axvline(payload["p_bar"], color="gray", ls="--",
                   label=f"maximizer {payload['p_bar']:.4f}")
        ax.set_xlabel("p")
        ax.set_ylabel("Laplace exponent")
        ax.legend()
        made.append(_save(fig, out_dir / f"{stem}_laplace_exponent.png"))
    if payload.get("scale"):
        xs = [q[0] for q in payload["scale"]]
        ws = [q[1] for q in payload["scale"]]
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(xs, ws, "-")
        ax.set_xlabel("x")
        ax.set_ylabel(f"scale function, p = {payload.get('scale_p', '?')}")
        made.append(_save(fig, out_dir / f"{stem}_scale_function.png"))
    return made


_RENDERERS = {
    "extinction": _fig_extinction,
    "spine-survival": _fig_spine_survival,
    "martingales": _fig_martingales,
    "decay": _fig_decay,
    "growth": _fig_growth,
    "many-to-one": _fig_many_to_one,
}


def render(experiment: str, data_path: str | Path,
           out_dir: str | Path | None = None) -> list[Path]:
    """Render the figures for one experiment output; returns paths made."""
    data_path = Path(data_path)
    out = Path(out_dir) if out_dir else data_path.parent
    out.mkdir(parents=True, exist_ok=True)
    stem = data_path.stem
    if experiment == "compute":
        return _fig_compute(data_path, stem, out)
    if experiment not in _RENDERERS:
        raise ConfigError(
            f"unknown experiment {experiment!r}; valid: "
            f"{', '.join(sorted(_RENDERERS))}, compute")
    header, rows = _read_csv(data_path)
    return _RENDERERS[experiment](header, rows, stem, out)
