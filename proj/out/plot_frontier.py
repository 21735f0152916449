# Expected profit against risk days per strategy, from frontier.csv.
import csv
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = pathlib.Path(__file__).resolve().parent
with open(here / "frontier.csv", newline="") as f:
    rows = list(csv.DictReader(f))

fig, ax = plt.subplots(figsize=(7, 5))
for name in dict.fromkeys(r["strategy"] for r in rows):
    pts = [r for r in rows if r["strategy"] == name]
    risk = [float(r["risk_days_per_year"]) for r in pts]
    profit = [float(r["expected_profit"]) for r in pts]
    ax.plot(risk, profit, marker="o", label=name)
    for r, x, y in zip(pts, risk, profit):
        ax.annotate(r["gamma"], (x, y), fontsize=7, xytext=(3, 3), textcoords="offset points")
ax.set_xlabel("days with negative profit per year")
ax.set_ylabel("expected profit ($/day)")
ax.legend()
ax.grid(alpha=0.3)
fig.tight_layout()
fig.savefig(here / "frontier.png", dpi=150)
