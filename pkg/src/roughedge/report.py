"""CSV, JSON and figure output for run directories.

CSV conventions: comma separated, ``\\n`` line endings, a single header row,
floats written with ``format(x, '.17g')`` (round-trip exact), no timing or
host information, so reruns of a configuration produce byte-identical files.
Timings live only in ``report.json``.

Column orders
-------------
``sweep_summary.csv``
    eps, sup_norm, ratio, slope_so_far, dtb_max, rec_max, S_I, S_II
``remainder_NN.csv`` / ``reconstruct.csv`` / ``dtb.csv``
    eps, xc1, xc2, x1, x2, f_rec, dtb, remainder (the single-quantity files
    keep the leading five columns and their own value column)
``diagnostics.csv``
    eps, M, S_I, S_II, S_I_ratio, S_II_ratio
``am_table.csv``
    eps, k, alpha, m, re, im
``model_integrals.csv``
    family, case, eps, alpha, value, bound, ratio
``verify.csv``
    check, measured, tolerance, passed, gating
"""

import json
import math
import os

import numpy as np


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def read_csv(path):
    """Header and rows as strings (for tests and downstream tools)."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    return lines[0].split(","), [ln.split(",") for ln in lines[1:]]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if hasattr(obj, "value") and not isinstance(obj, (str, bytes)):
        return _jsonable(obj.value)
    return obj


def write_json(path, payload):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


# -- tables ------------------------------------------------------------------------

def sweep_rows(report):
    rows = []
    for r in report.records:
        d = r.diagnostics or {}
        rows.append((r.eps, r.sup_norm, r.ratio, r.slope_so_far, r.dtb_max, r.rec_max,
                     d.get("S_I"), d.get("S_II")))
    return rows


SWEEP_HEADER = ("eps", "sup_norm", "ratio", "slope_so_far", "dtb_max", "rec_max", "S_I", "S_II")
FIELD_HEADER = ("eps", "xc1", "xc2", "x1", "x2", "f_rec", "dtb", "remainder")


def field_rows(fields, x0):
    rows = []
    for fld in fields:
        for (a, b), fr, dt, rm in zip(fld.xcheck, fld.f_rec, fld.dtb, fld.remainder):
            rows.append((fld.eps, a, b, x0[0] + fld.eps * a, x0[1] + fld.eps * b, fr, dt, rm))
    return rows


# -- figures -----------------------------------------------------------------------

def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path):
    # fixed metadata keeps the PNG bytes independent of the matplotlib build date
    fig.savefig(path, dpi=110, metadata={"Software": None})


def sweep_figure(report, path):
    plt = _pyplot()
    eps = np.array([r.eps for r in report.records])
    sup = np.array([r.sup_norm for r in report.records])
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
    ax = axes[0]
    if np.all(sup > 0):
        ax.loglog(eps, sup, "o-", label="sup |f_rec - DTB|")
        ref = sup[0] * np.sqrt(eps / eps[0]) * np.log(1 / eps) / np.log(1 / eps[0])
        ax.loglog(eps, ref, "k--", lw=1, label="eps^1/2 ln(1/eps)")
        ax.legend(fontsize=8)
    else:
        ax.text(0.5, 0.5, "exact zero", ha="center", transform=ax.transAxes)
    ax.set_xlabel("eps")
    ax.set_title("remainder sup-norm")
    ax = axes[1]
    ax.semilogx(eps, [r.ratio for r in report.records], "s-")
    ax.set_xlabel("eps")
    ax.set_title("r(eps)")
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)
    return path


def field_figure(fld, path):
    plt = _pyplot()
    xc = fld.xcheck
    n = int(round(math.sqrt(xc.shape[0])))
    ext = (xc[:, 0].min(), xc[:, 0].max(), xc[:, 1].min(), xc[:, 1].max())
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.4))
    for ax, data, title in zip(axes, (fld.f_rec, fld.dtb, fld.remainder), ("f_rec", "DTB", "remainder")):
        im = ax.imshow(np.asarray(data).reshape(n, n).T, origin="lower", extent=ext, cmap="viridis")
        ax.set_title(f"{title}, eps={fld.eps:.4g}", fontsize=9)
        fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)
    return path


def diagnostics_figure(eps, s1, s2, path):
    plt = _pyplot()
    eps = np.asarray(eps)
    norm = np.sqrt(eps) * np.log(1 / eps)
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ax.semilogx(eps, np.asarray(s1) / norm, "o-", label="S_I / (eps^1/2 ln(1/eps))")
    ax.semilogx(eps, np.asarray(s2) / norm, "s-", label="S_II / (eps^1/2 ln(1/eps))")
    ax.set_xlabel("eps")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)
    return path


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
