"""Writes base_load_desk.csv: a 24 h non-EV demand profile per load bus,
starting at noon in 15-minute slots, with an evening peak and a night valley."""

import argparse
import math

SLOTS = 96
SLOT_HOURS = 0.25
START_HOUR = 12.0

# bus: (peak slot, peak MW, night MW, peak width in slots, afternoon offset MW)
BUSES = {
    5: (20, 148.0, 55.0, 4.0, 0.0),
    7: (21, 143.0, 52.0, 4.5, -4.0),
    9: (19, 150.0, 57.0, 4.0, 2.0),
}


def profile(peak_slot, peak, night, width, noon):
    def diurnal(t):
        hour = (START_HOUR + t * SLOT_HOURS) % 24.0
        return night + (noon - night) * 0.5 * (1.0 + math.cos(2.0 * math.pi * (hour - 15.0) / 24.0))

    lift = peak - diurnal(peak_slot)
    return [diurnal(t) + lift * math.exp(-0.5 * ((t - peak_slot) / width) ** 2) for t in range(SLOTS)]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--noon", type=float, default=125.0, help="afternoon level of bus 5 in MW")
    parser.add_argument("--output", default="base_load_desk.csv")
    args = parser.parse_args()

    series = {bus: profile(p, pk, n, w, args.noon + off) for bus, (p, pk, n, w, off) in BUSES.items()}
    with open(args.output, "w") as f:
        f.write("slot,bus_id,mw\n")
        for t in range(SLOTS):
            for bus in sorted(series):
                f.write(f"{t},{bus},{series[bus][t]:.3f}\n")


if __name__ == "__main__":
    main()
