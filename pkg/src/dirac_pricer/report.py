"""Figure rendering for the report path: charts written next to the CSVs."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

from .implied_vol import SmileRow  # noqa: E402


def render_smile(rows: list[SmileRow], path: str) -> str:
    """Two-panel smile figure: price vs strike and implied vol vs strike."""
    strikes = [r.strike for r in rows]
    prices = [r.price for r in rows]
    vol_strikes = [r.strike for r in rows if r.flag == "ok" and math.isfinite(r.implied_vol)]
    vols = [r.implied_vol for r in rows if r.flag == "ok" and math.isfinite(r.implied_vol)]

    fig, (ax_price, ax_vol) = plt.subplots(1, 2, figsize=(9.0, 3.6))
    ax_price.plot(strikes, prices, marker="o", color="tab:blue")
    ax_price.set_xlabel("strike (rate/yr)")
    ax_price.set_ylabel("payer price")
    ax_price.grid(True, alpha=0.3)

    if vols:
        ax_vol.plot(vol_strikes, vols, marker="s", color="tab:red")
    ax_vol.axvline(rows[0].forward, linestyle="--", color="gray", linewidth=0.8)
    ax_vol.set_xlabel("strike (rate/yr)")
    ax_vol.set_ylabel("implied vol (/sqrt(yr))")
    ax_vol.grid(True, alpha=0.3)

    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
