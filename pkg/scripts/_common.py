"""Helpers shared by the experiment scripts."""

import argparse
import os

from ropper import __version__
from ropper.io import svg_line_chart, write_csv

METHOD_LABELS = {"ropper": "ROPPER", "pepp_mle": "PEPP-MLE",
                 "blup_perc": "BLUP percentiles", "residual_perc": "residual percentiles"}


def parser(description, replicates=100):
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--replicates", type=int, default=replicates)
    p.add_argument("--seed", type=int, default=20240101)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default="results")
    return p


def save(out, name, header, rows, settings):
    os.makedirs(out, exist_ok=True)
    prov = [f"# ropper {__version__}"] + [f"# {k}={v}" for k, v in settings.items()]
    path = os.path.join(out, name)
    write_csv(path, header, rows, prov)
    return path


def plot(out, name, x, series, **labels):
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, name)
    svg_line_chart(path, x, series, **labels)
    return path
