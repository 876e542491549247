"""Render solver CSV output into the standard figure layouts.

Curve files (columns x,value,lower_payoff,upper_payoff) become a value plot
between grey payoff envelopes; sweep files (columns sigma,delta_bar,delta_0,
x_star,y_star,skipped) become either the two penalty-threshold curves or the
two exercise-boundary curves with the cancellation band shaded.  Rendering is
a pure function of the file contents: fixed style, fixed canvas, pinned
metadata, so a given CSV always produces byte-identical output.
"""

import csv
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.size": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
}
GREY = "0.6"
BLACK = "black"
META = {"Software": "gamefigs"}

CURVE_COLUMNS = ["x", "value", "lower_payoff", "upper_payoff"]
SWEEP_COLUMNS = ["sigma", "delta_bar", "delta_0", "x_star", "y_star", "skipped"]


def _read_rows(csv_path, expected_columns):
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{csv_path}: empty file")
        if header != expected_columns:
            raise ValueError(
                f"{csv_path}: expected columns {expected_columns}, got {header}")
        rows = [row for row in reader if row and any(cell for cell in row)]
    if not rows:
        raise ValueError(f"{csv_path}: no data rows")
    return rows


def _column(rows, idx):
    out = []
    for row in rows:
        cell = row[idx]
        out.append(float(cell) if cell else math.nan)
    return np.array(out)


def render_curve(csv_path, out_image):
    """Value curve in black between the grey lower/upper payoff envelopes."""
    rows = _read_rows(csv_path, CURVE_COLUMNS)
    x = _column(rows, 0)
    value = _column(rows, 1)
    lower = _column(rows, 2)
    upper = _column(rows, 3)

    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(x, upper, color=GREY, lw=1.2)
        ax.plot(x, lower, color=GREY, lw=1.2)
        ax.plot(x, value, color=BLACK, lw=1.6)
        ax.set_xlabel("x")
        ax.set_ylabel("value")
        fig.savefig(out_image, metadata=META)
        plt.close(fig)
    return out_image


def render_sweep(csv_path, out_image, kind):
    """Threshold curves or exercise boundaries along the volatility grid.

    Rows carrying the skipped marker keep their grid position but break the
    curves (no interpolation across them).  For the boundary view the band
    between the strike level and the upper boundary is shaded; the strike
    level is taken as the lowest valid upper boundary, which it equals
    whenever the sweep reaches the single-point regime.
    """
    if kind not in ("thresholds", "boundaries"):
        raise ValueError(f"unknown sweep figure kind {kind!r}")
    rows = _read_rows(csv_path, SWEEP_COLUMNS)
    sigma = _column(rows, 0)
    skipped = np.array([row[5] == "skipped" for row in rows])

    def series(idx):
        vals = _column(rows, idx)
        vals[skipped] = math.nan
        return vals

    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        if kind == "thresholds":
            ax.plot(sigma, series(1), color=BLACK, lw=1.6, label="cancel-worthless level")
            ax.plot(sigma, series(2), color=GREY, lw=1.6, label="interval threshold")
            ax.set_ylabel("penalty level")
            ax.legend(frameon=False)
        else:
            x_star = series(3)
            y_star = series(4)
            strike_level = np.nanmin(y_star)
            ax.fill_between(sigma, np.full_like(sigma, strike_level), y_star,
                            where=~np.isnan(y_star), color="0.88")
            ax.plot(sigma, y_star, color=BLACK, lw=1.6)
            ax.plot(sigma, x_star, color=BLACK, lw=1.6)
            ax.set_ylabel("log-price boundaries")
        ax.set_xlabel("sigma")
        fig.savefig(out_image, metadata=META)
        plt.close(fig)
    return out_image
