"""Command line entry point: ``interface-lab <command>``.

Exit codes: 0 success, 1 a check failed, 2 bad input (I/O, config, checksum).
"""

from __future__ import annotations

import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import click
import numpy as np

from . import oracle, stats
from .interfaces import InterfaceBundle
from .lattice import LatticeGeometry
from .model import ChecksumError, EdgeConfig, Params, dump_config, load_config
from .pillars import all_pillar_heights, dump_pillar, event_A, pillar_at
from .sampler import SamplerConfig, interior_index, manifest_digest, run_chain, write_manifest
from .walls import classify_bundle, decompose_walls

EXIT_OK, EXIT_FAIL, EXIT_IO = 0, 1, 2
SUITES = ("es", "conditional", "fkg", "height-shift", "sampler-tv", "A_h")


class InputError(click.ClickException):
    exit_code = EXIT_IO


# ---------------------------------------------------------------- run config
@dataclass
class RunConfig:
    n: int = 8
    m: int = 6
    beta: float = 2.0
    q: float = 3.0
    sweeps: int = 200
    burnin: int = 100
    thin: int = 1
    seed: int = 0
    kernel: str = "sw"
    extra: dict = field(default_factory=dict)

    FIELDS = ("n", "m", "beta", "q", "sweeps", "burnin", "thin", "seed", "kernel")

    @classmethod
    def load(cls, path: str | None, overrides: dict) -> "RunConfig":
        values: dict = {}
        if path:
            try:
                text = Path(path).read_text()
            except OSError as exc:
                raise InputError(f"cannot read config {path}: {exc}") from exc
            for ln, line in enumerate(text.splitlines(), 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise InputError(f"{path}:{ln}: expected key=value")
                k, v = (t.strip() for t in line.split("=", 1))
                values[k] = v
        values.update({k: v for k, v in overrides.items() if v is not None})
        cfg = cls()
        types = {"n": int, "m": int, "beta": float, "q": float, "sweeps": int, "burnin": int, "thin": int,
                 "seed": int, "kernel": str}
        for k, v in values.items():
            if k in types:
                try:
                    setattr(cfg, k, types[k](v))
                except ValueError as exc:
                    raise InputError(f"bad value for {k}: {v!r}") from exc
            else:
                cfg.extra[k] = v
        return cfg

    def get(self, key: str, default, typ=str):
        try:
            return typ(self.extra.get(key, default))
        except ValueError as exc:
            raise InputError(f"bad value for {key}: {self.extra[key]!r}") from exc

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.FIELDS}
        d.update(self.extra)
        return d

    def sampler(self, seed: int | None = None, colors: bool = False) -> SamplerConfig:
        try:
            return SamplerConfig(Params(self.beta, self.q), LatticeGeometry(self.n, self.m),
                                 burn_in=self.burnin, thinning=self.thin,
                                 seed=self.seed if seed is None else seed, kernel=self.kernel,
                                 init="flat", colors=colors)
        except ValueError as exc:
            raise InputError(str(exc)) from exc


def _out_dir(out: str) -> Path:
    p = Path(out)
    try:
        p.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create {out}: {exc}") from exc
    return p


def _common(f):
    f = click.option("--config", "config_path", type=str, default=None, help="key=value config file")(f)
    f = click.option("--seed", type=int, default=None)(f)
    f = click.option("--out", type=str, default="out", show_default=True)(f)
    f = click.option("--threads", type=int, default=1, show_default=True,
                     help="worker threads for independent chains")(f)
    f = click.option("--set", "sets", multiple=True, help="override a config key (key=value)")(f)
    return f


def _config(config_path, seed, sets) -> RunConfig:
    over = {"seed": seed}
    for s in sets:
        if "=" not in s:
            raise InputError(f"--set expects key=value, got {s!r}")
        k, v = s.split("=", 1)
        over[k.strip()] = v.strip()
    return RunConfig.load(config_path, over)


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(t) for t in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def cache_dir() -> Path:
    return Path(os.environ.get("INTERFACE_LAB_CACHE", Path.home() / ".cache" / "interface_lab"))


def _load_dump(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    try:
        return load_config(text)
    except ChecksumError as exc:
        raise InputError(f"{path}: {exc}") from exc
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise InputError(f"{path}: malformed configuration dump ({exc})") from exc


@click.group()
def main() -> None:
    """Random-cluster interface laboratory."""


# -------------------------------------------------------------------- verify
def suite_es(cfg: RunConfig) -> dict:
    g = LatticeGeometry(2, 1)
    rows = {}
    for q in (2, 3):
        r = oracle.verify_es_marginals(Params(1.0, q), g)
        rows[q] = r
    ok = all(r["sigma_error"] < 1e-10 and r["omega_error"] < 1e-10 and r["coupling_ok"] for r in rows.values())
    return {"ok": ok, "detail": {q: (r["sigma_error"], r["omega_error"]) for q, r in rows.items()}}


def suite_conditional(cfg: RunConfig) -> dict:
    r = oracle.conditional_dichotomy_exhaustive(Params(1.0, 2.0), LatticeGeometry(2, 1))
    return {"ok": r["max_error"] < 1e-12, "detail": r}


def suite_fkg(cfg: RunConfig) -> dict:
    rng = np.random.default_rng(cfg.seed)
    pairs = cfg.get("fkg_pairs", 200, int)
    slack = {}
    for q in (1.0, 1.5, 2.0, 3.0):
        slack[q] = oracle.verify_fkg(Params(1.0, q), LatticeGeometry(2, 1), pairs, rng)["min_slack"]
    return {"ok": min(slack.values()) >= -1e-12, "detail": slack}


def height_shift_events(seed: int, count: int = 50, marked: int = 8):
    rng = np.random.default_rng(seed)
    g = LatticeGeometry(2, 3)
    band = oracle.band_edges(g, -1, 1)
    mk = sorted(int(t) for t in rng.choice(band, marked, replace=False))
    return oracle.random_local_events(rng, mk, count)


def suite_height_shift(cfg: RunConfig) -> dict:
    r = oracle.verify_height_shift(Params(1.0, 2.0), 2, 3, 1, height_shift_events(cfg.seed))
    return {"ok": r["ok"], "detail": {"max_ratio": r["max_ratio"], "q2": r["q2"]}}


def sampler_tv(sweeps: int, seed: int) -> float:
    g = LatticeGeometry(2, 1)
    params = Params(1.0, 2.0)
    exact = oracle.enumerate(params, g, "Dn")
    hist = np.zeros(len(exact.probs))
    for om, _ in run_chain(SamplerConfig(params, g, burn_in=100, seed=seed), sweeps):
        hist[interior_index(om)] += 1
    return oracle.tv_distance(hist / hist.sum(), exact)


def suite_sampler_tv(cfg: RunConfig) -> dict:
    sweeps = cfg.get("tv_sweeps", 1_000_000, int)
    tv = sampler_tv(sweeps, cfg.seed)
    g = LatticeGeometry(2, 1)
    c = SamplerConfig(Params(1.0, 2.0), g, burn_in=10, seed=cfg.seed)
    a = [om.bits.copy() for om, _ in run_chain(c, 200)]
    b = [om.bits.copy() for om, _ in run_chain(c, 200)]
    same = all(np.array_equal(x, y) for x, y in zip(a, b))
    return {"ok": tv < 0.02 and same, "detail": {"tv": tv, "sweeps": sweeps, "deterministic": same}}


def a_h_agreement(configs: int, seed: int) -> dict:
    g = LatticeGeometry(4, 3)
    table = oracle.a_shape_table(g)
    rng = np.random.default_rng(seed)
    mismatches = []
    positives = 0
    for t in range(configs):
        bits = oracle.confined_random_bits(rng, g, float(rng.uniform(0.3, 0.9)))
        om = EdgeConfig(g, bits)
        for h in (1, 2, 3):
            for strict in (True, False):
                a = oracle.brute_force_A(table, bits, h, strict)
                b = event_A(om, (1, 1), h, strict).value
                positives += a
                if a != b:
                    mismatches.append((t, h, strict))
    return {"ok": not mismatches, "configs": configs, "mismatches": mismatches[:10], "positives": positives,
            "shapes": len(table.masks)}


def suite_a_h(cfg: RunConfig) -> dict:
    r = a_h_agreement(cfg.get("a_configs", 10_000, int), cfg.seed)
    return {"ok": r["ok"], "detail": r}


SUITE_FUNCS = {"es": suite_es, "conditional": suite_conditional, "fkg": suite_fkg, "height-shift": suite_height_shift,
               "sampler-tv": suite_sampler_tv, "A_h": suite_a_h}


@main.command()
@_common
@click.option("--suite", "suites", multiple=True, type=click.Choice(SUITES), help="run only these suites")
@click.option("--fixture", "fixtures", multiple=True, help="configuration dumps to checksum-verify first")
def verify(config_path, seed, out, threads, sets, suites, fixtures):
    """Run the exact-oracle suites."""
    cfg = _config(config_path, seed, sets)
    for f in fixtures:
        _load_dump(f)
    chosen = suites or SUITES
    results = {}
    for name in chosen:
        t0 = time.time()
        r = SUITE_FUNCS[name](cfg)
        r["seconds"] = round(time.time() - t0, 3)
        results[name] = r
        click.echo(f"{name:13s} {'PASS' if r['ok'] else 'FAIL'}  {r['detail']}")
    d = _out_dir(out)
    (d / "verify.json").write_text(json.dumps(results, indent=2, sort_keys=True, default=str))
    sys.exit(EXIT_OK if all(r["ok"] for r in results.values()) else EXIT_FAIL)


# -------------------------------------------------------------------- sample
@main.command()
@_common
@click.option("--samples", type=int, default=10, show_default=True)
@click.option("--colors/--no-colors", default=False)
def sample(config_path, seed, out, threads, sets, samples, colors):
    """Write configuration dumps and a manifest."""
    cfg = _config(config_path, seed, sets)
    sc = cfg.sampler(colors=colors)
    d = _out_dir(out)
    started = time.time()
    counts: dict = {}
    for t, (om, sg) in enumerate(run_chain(sc, samples, counts)):
        (d / f"config_{t:05d}.json").write_text(dump_config(om, sc.params, sg))
    counts["samples"] = samples
    man = write_manifest(d / "manifest.json", sc, counts, started)
    click.echo(f"wrote {samples} samples to {d} (digest {manifest_digest(man)[:12]})")


# --------------------------------------------------------------------- rates
@main.command()
@_common
@click.option("--h-max", type=int, default=1, show_default=True)
@click.option("--samples", type=int, default=1000, show_default=True)
@click.option("--kinds", default="E", show_default=True, help="comma list among E,nred,blue,bot")
def rates(config_path, seed, out, threads, sets, h_max, samples, kinds):
    """Estimate event probabilities and rates; writes rates.csv."""
    cfg = _config(config_path, seed, sets)
    kinds_t = tuple(k.strip() for k in kinds.split(","))
    bad = [k for k in kinds_t if k not in stats.EVENT_KINDS]
    if bad:
        raise InputError(f"unknown kinds {bad}")
    colored = any(k != "E" for k in kinds_t)
    sc = cfg.sampler(colors=colored)
    cols = stats.bulk_columns(sc.geometry, h_max)
    if not cols:
        raise InputError(f"no column is at distance >= {4 * h_max} from the boundary at n={cfg.n}")
    curves = stats.rate_curve(run_chain(sc, samples), cols, h_max, kinds_t)
    rows = [e.row() for k in kinds_t for e in curves[k]]
    d = _out_dir(out)
    stats.write_csv(d / "rates.csv", stats.RATES_FIELDS, rows)
    for k in kinds_t:
        for e in curves[k]:
            note = " (below MC floor)" if e.below_floor else ""
            click.echo(f"{k} h={e.h} p={e.phat:.3g} [{e.lo:.3g},{e.hi:.3g}] alpha={e.alpha_hat}{note}")


# ------------------------------------------------------------------- extrema
@main.command()
@_common
@click.option("--ns", default="8,16", show_default=True, help="comma list of side lengths")
@click.option("--samples", type=int, default=50, show_default=True)
def extrema(config_path, seed, out, threads, sets, ns, samples):
    """Sample maxima of the top interface per n; writes extrema.csv."""
    cfg = _config(config_path, seed, sets)
    try:
        n_list = [int(t) for t in ns.split(",")]
    except ValueError as exc:
        raise InputError(f"bad --ns {ns!r}") from exc
    pre = stats.rigidity_check(run_chain(cfg.sampler(), 5))
    if not pre["ok"]:
        click.echo(f"warning: flat fraction {pre['flat_fraction']:.3f} below {pre['threshold']}")

    def one(n):
        c = RunConfig(**{**cfg.__dict__, "n": n, "extra": dict(cfg.extra)})
        rows: list = []
        rec = stats.extrema_samples(c.sampler(), samples, rows=rows)
        return rec, rows

    res = _map(one, n_list, threads)
    rows = [r for _, rr in res for r in rr]
    d = _out_dir(out)
    stats.write_csv(d / "extrema.csv", stats.EXTREMA_FIELDS, rows)
    for rec, _ in res:
        click.echo(f"n={rec.n} mode={rec.mode} mass(+-1)={rec.mode_mass():.3f} median={rec.median} "
                   f"tainted={rec.tainted}")


# ----------------------------------------------------------------- decompose
@main.command()
@click.argument("dump", type=str)
@click.option("--out", type=str, default="out", show_default=True)
def decompose(dump, out):
    """Interface, wall and pillar JSON for a configuration dump."""
    omega, params, sigma = _load_dump(dump)
    b = InterfaceBundle(omega, sigma)
    ctx = classify_bundle(b)
    fam = decompose_walls(ctx)
    heights = all_pillar_heights(b)
    d = _out_dir(out)
    (d / "interface.json").write_text(b.full.to_json())
    (d / "walls.json").write_text(fam.to_json())
    g = b.geometry
    pillars = [json.loads(dump_pillar(pillar_at(b, (i, j)))) for i in range(g.n) for j in range(g.n)
               if heights[i, j] > 0]
    (d / "pillars.json").write_text(json.dumps({"heights": heights.tolist(), "pillars": pillars},
                                               sort_keys=True))
    click.echo(f"walls={len(ctx.walls)} max_pillar={int(heights.max())}")


# ---------------------------------------------------------------------- plot
@main.command()
@click.argument("csv_path", type=str)
@click.option("--out", type=str, default="plot.svg", show_default=True)
def plot(csv_path, out):
    """Render rates.csv, extrema.csv or decorr.csv to SVG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    try:
        with open(csv_path, newline="") as fh:
            header = fh.readline().strip()
    except OSError as exc:
        raise InputError(f"cannot read {csv_path}: {exc}") from exc
    cols = header.split(",") if header else []
    known = {tuple(stats.RATES_FIELDS): "rates", tuple(stats.EXTREMA_FIELDS): "extrema",
             tuple(stats.DECORR_FIELDS): "decorr"}
    if cols and tuple(cols) not in known:
        raise InputError(f"unrecognised columns {cols}")
    rows = stats.read_csv(csv_path) if cols else []
    kind = known.get(tuple(cols))
    plt.rcParams["svg.hashsalt"] = "interface-lab"
    fig, ax = plt.subplots(figsize=(5, 3.5))
    if kind == "rates" and rows:
        for k in sorted({r["kind"] for r in rows}):
            sel = [r for r in rows if r["kind"] == k and r["alpha_hat"]]
            ax.plot([int(r["h"]) for r in sel], [float(r["alpha_hat"]) for r in sel], "o-", label=k)
        ax.set_xlabel("h")
        ax.set_ylabel("-log p")
        ax.legend()
    elif kind == "extrema" and rows:
        for n in sorted({int(r["n"]) for r in rows}):
            vals = [int(r["Mn"]) for r in rows if int(r["n"]) == n and r["Mn"] != ""]
            if vals:
                ax.hist(vals, bins=np.arange(min(vals), max(vals) + 2) - 0.5, alpha=0.5, label=f"n={n}")
        ax.set_xlabel("M_n")
        ax.legend()
    elif kind == "decorr" and rows:
        d = [int(r["d"]) for r in rows]
        ax.errorbar(d, [float(r["cov"]) for r in rows], yerr=[float(r["err"]) for r in rows], fmt="o")
        ax.set_xlabel("distance")
        ax.set_ylabel("covariance")
    try:
        fig.savefig(out, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise InputError(f"cannot write {out}: {exc}") from exc
    finally:
        plt.close(fig)
    click.echo(f"wrote {out}")


if __name__ == "__main__":  # pragma: no cover
    main()
