"""Batch front end: ``pinlab <command> --config <file> [--seed S] [--workers W]``.

A config is one JSON object describing one experiment::

    {
      "law": {"family": "biased_rw", "p": 0.7},
      "beta": 1.0,
      "sigma": 1.0,
      "u_grid": {"min": 0.0, "max": 1.0, "points": 11},
      "N_ladder": [8192, 16384, 32768],
      "replicas": 32,
      "master_seed": 0,
      "outputs": {"csv_path": "out.csv", "json_path": "out.json"}
    }

Command-specific keys: ``delta_grid`` (rate), ``N`` and ``windows`` (dp),
``betas`` (scan), ``budget`` (phase-report) and ``force`` = ``{"p": ...,
"then": <command>}`` (force). ``PINLAB_SEED`` and ``PINLAB_WORKERS``
override the config; ``--seed`` and ``--workers`` override both.

Exit status is 0 on success, 2 for configuration errors and 3 for
numerical failures. Results are written only after every computation has
succeeded, each file through a temporary name and an atomic rename.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import analysis
from .errors import AtCriticalPoint, ConfigError, NumericalFailure, PinlabError
from .excursion import BiasedRW, ExcursionLaw, law_from_dict
from .ratefun import RateProfile
from .renewal import PinningModel, partition, replica_seed, sample_disorder

log = logging.getLogger("pinlab")

COMMANDS = ("rate", "annealed", "simulate", "critical", "phase-report", "dp", "force", "scan")

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def _grid(block, name):
    try:
        lo, hi, n = float(block["min"]), float(block["max"]), int(block["points"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{name} needs numeric min, max, points ({exc})") from None
    if n < 1:
        raise ConfigError(f"{name} must have at least one point")
    if n == 1:
        return np.array([lo])
    if not hi > lo:
        raise ConfigError(f"{name}: max must exceed min")
    return np.linspace(lo, hi, n)


@dataclass
class ExperimentConfig:
    """Validated experiment description (see the module docstring)."""

    law: ExcursionLaw
    beta: float
    sigma: float = 0.0
    u_grid: np.ndarray | None = None
    N_ladder: list = field(default_factory=lambda: [1024])
    replicas: int = 1
    master_seed: int = 0
    workers: int = 1
    csv_path: str | None = None
    json_path: str | None = None
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        raw = dict(raw)
        if "law" not in raw:
            raise ConfigError("config needs a law block")
        try:
            law = law_from_dict(raw.pop("law"))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad law block: {exc}") from None
        try:
            beta = float(raw.pop("beta"))
            sigma = float(raw.pop("sigma", 0.0))
            ladder = [int(n) for n in raw.pop("N_ladder", [1024])]
            replicas = int(raw.pop("replicas", 1))
            seed = int(raw.pop("master_seed", 0))
            workers = int(raw.pop("workers", 1))
        except KeyError as exc:
            raise ConfigError(f"config is missing {exc}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad scalar in config: {exc}") from None
        if not beta > 0.0 or not math.isfinite(beta):
            raise ConfigError("beta must be positive")
        if sigma < 0.0:
            raise ConfigError("sigma must be nonnegative")
        if not ladder or any(n < 1 for n in ladder):
            raise ConfigError("N_ladder must be a nonempty list of positive sizes")
        if any(b <= a for a, b in zip(ladder, ladder[1:])):
            raise ConfigError("N_ladder must be strictly increasing")
        if replicas < 1:
            raise ConfigError("replicas must be >= 1")
        if seed < 0:
            raise ConfigError("master_seed must be nonnegative")
        u_grid = _grid(raw.pop("u_grid"), "u_grid") if "u_grid" in raw else None
        outputs = raw.pop("outputs", {}) or {}
        return cls(law, beta, sigma, u_grid, ladder, replicas, seed, max(1, workers),
                   outputs.get("csv_path"), outputs.get("json_path"), raw)

    @property
    def logMV(self) -> float:
        return 0.5 * (self.beta * self.sigma) ** 2

    def need_u_grid(self) -> np.ndarray:
        if self.u_grid is None:
            raise ConfigError("this command needs u_grid")
        return self.u_grid


def load_config(path, seed=None, workers=None) -> ExperimentConfig:
    """Read a config file and apply environment and command-line overrides."""
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    cfg = ExperimentConfig.from_dict(raw)
    for env, attr in (("PINLAB_SEED", "master_seed"), ("PINLAB_WORKERS", "workers")):
        if os.environ.get(env):
            try:
                setattr(cfg, attr, int(os.environ[env]))
            except ValueError:
                raise ConfigError(f"{env} must be an integer") from None
    if seed is not None:
        cfg.master_seed = int(seed)
    if workers is not None:
        cfg.workers = int(workers)
    if cfg.master_seed < 0 or cfg.workers < 1:
        raise ConfigError("seed must be >= 0 and workers >= 1")
    return cfg


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(analysis._json_value(obj), indent=2, sort_keys=True) + "\n"


def atomic_write(path, text: str):
    """Write ``text`` to ``path`` via a temporary file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class Artifacts:
    csv: str | None = None
    json: str | None = None


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _safe_contact(law, beta, u, logmv):
    try:
        return analysis.annealed_contact_fraction(law, beta, u, logmv)
    except AtCriticalPoint:
        return math.nan


def cmd_rate(cfg: ExperimentConfig, offset=0.0) -> Artifacts:
    prof = RateProfile(cfg.law)
    grid = cfg.extra.get("delta_grid", {"min": 0.0, "max": 1.0 / cfg.law.a, "points": 101})
    deltas = _grid(grid, "delta_grid")
    sig = cfg.sigma if cfg.sigma > 0 else 1.0
    tab = prof.tabulate(deltas, cfg.beta, sig)
    cols = ["delta", "g", "ghat", "ghat_f", "h"]
    rows = zip(*(tab[c] for c in cols))
    try:
        d0 = prof.delta0(cfg.beta, cfg.logMV, sig)
    except PinlabError:
        d0 = None
    side = {"b_E": prof.b_E, "r": prof.r, "m_E": prof.m_E, "b_E_prime": prof.b_e_prime,
            "x_star": prof.x_star, "delta0": d0}
    return Artifacts(csv_text(cols, rows), json_text(side))


def cmd_annealed(cfg: ExperimentConfig, offset=0.0) -> Artifacts:
    rows = []
    for u in cfg.need_u_grid():
        v = u - offset
        f = analysis.annealed_free_energy(cfg.law, cfg.beta, v, cfg.logMV)
        rows.append((u, f, _safe_contact(cfg.law, cfg.beta, v, cfg.logMV)))
    uc = analysis.annealed_critical_point(cfg.law, cfg.beta, cfg.logMV) + offset
    return Artifacts(csv_text(["u", "f", "C"], rows), json_text({"u_c_annealed": uc}))


def _replica_rows(model, N, replicas, master, workers):
    def one(i):
        s = replica_seed(master, i)
        res = partition(model, sample_disorder(s, N, model.sigma), N)
        return s, res

    idx = range(replicas)
    if workers > 1 and replicas > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(one, idx))
    return [one(i) for i in idx]


def cmd_simulate(cfg: ExperimentConfig, offset=0.0) -> Artifacts:
    rows = []
    for N in cfg.N_ladder:
        for u in cfg.need_u_grid():
            model = PinningModel(cfg.law, cfg.beta, u - offset, cfg.sigma)
            for s, res in _replica_rows(model, N, cfg.replicas, cfg.master_seed, cfg.workers):
                rows.append((s, N, cfg.beta, u, res.logZ_free, res.logZ_constrained,
                             res.contact_fraction))
    header = ["seed", "N", "beta", "u", "logZ_free", "logZ_constrained", "contact_fraction"]
    return Artifacts(csv_text(header, rows))


def cmd_critical(cfg: ExperimentConfig, offset=0.0) -> Artifacts:
    bracket = cfg.extra.get("bracket")
    if bracket is not None:
        bracket = (float(bracket[0]) - offset, float(bracket[1]) - offset)
    est = analysis.quenched_critical_point(cfg.law, cfg.beta, cfg.sigma, cfg.N_ladder,
                                           cfg.replicas, cfg.master_seed, cfg.workers,
                                           bracket=bracket)
    out = {
        "u_c_quenched_estimate": est.estimate + offset,
        "uncertainty": est.uncertainty,
        "u_c_annealed": analysis.annealed_critical_point(cfg.law, cfg.beta, cfg.logMV) + offset,
        "N_ladder": est.ladder,
        "u_N": [v + offset for v in est.u_N],
        "bisection_halfwidth": est.bisection_halfwidth,
        "extrapolation_residual": est.extrapolation_residual,
        "statistical": est.statistical,
        "master_seed": cfg.master_seed,
        "replicas": cfg.replicas,
    }
    rows = [(N, v + offset) for N, v in zip(est.ladder, est.u_N)]
    return Artifacts(csv_text(["N", "u_N"], rows), json_text(out))


def cmd_phase_report(cfg: ExperimentConfig, offset=0.0) -> Artifacts:
    rep = analysis.classify_transition(cfg.law, cfg.beta, cfg.sigma)
    if rep.transition_case == "Thm1_transient_exp":
        budget = {"N_ladder": cfg.N_ladder, "replicas": cfg.replicas,
                  "master_seed": cfg.master_seed, "workers": cfg.workers}
        budget.update(cfg.extra.get("budget", {}))
        rep = analysis.theorem1_report(cfg.law, cfg.beta, cfg.sigma, budget)
    if offset:
        rep.u_c_annealed += offset
        if rep.u_c_quenched_estimate is not None:
            rep.u_c_quenched_estimate += offset
        rep.notes.append(f"critical points in force units: pinning strength + {offset!r}")
    return Artifacts(json=json_text(rep.to_dict()))


def cmd_dp(cfg: ExperimentConfig, offset=0.0) -> Artifacts:
    try:
        N = int(cfg.extra.get("N", cfg.N_ladder[-1]))
        windows = [(float(lo), float(hi)) for lo, hi in
                   cfg.extra.get("windows", [(0.1, 0.2), (0.3, 0.4)])]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad dp options: {exc}") from None
    if any(not 0.0 <= lo < hi <= 1.0 for lo, hi in windows):
        raise ConfigError("dp windows must satisfy 0 <= lo < hi <= 1")
    res = analysis.contact_count_rate(cfg.law, N, windows)
    cols = ["lo", "hi", "N", "rate_dp", "inf_ghat", "rel_err"]
    return Artifacts(csv_text(cols, [[r[c] for c in cols] for r in res]))


def cmd_scan(cfg: ExperimentConfig, offset=0.0) -> Artifacts:
    betas = [float(b) for b in cfg.extra.get("betas", [cfg.beta])]
    N = cfg.N_ladder[-1]
    sig = cfg.sigma if cfg.sigma > 0 else 1.0
    prof = RateProfile(cfg.law)
    rows = []
    for beta in betas:
        if not beta > 0.0:
            raise ConfigError("betas must be positive")
        lmv = 0.5 * (beta * cfg.sigma) ** 2
        for u in cfg.need_u_grid():
            v = u - offset
            model = PinningModel(cfg.law, beta, v, cfg.sigma)
            fs, cs = analysis.quenched_samples(model, N, cfg.replicas, cfg.master_seed,
                                               cfg.workers)
            fq, se = analysis._mean_se(fs)
            try:
                bound = prof.quenched_upper_bound(beta, v, lmv, sig)
            except PinlabError:
                bound = math.nan
            rows.append((beta, u, analysis.annealed_free_energy(cfg.law, beta, v, lmv), fq, se,
                         _safe_contact(cfg.law, beta, v, lmv), float(cs.mean()), bound))
    header = ["beta", "u", "f_annealed", "f_quenched", "stderr", "C_annealed", "C_quenched",
              "bound_qfreeineq"]
    return Artifacts(csv_text(header, rows))


def cmd_force(cfg: ExperimentConfig, offset=0.0) -> Artifacts:
    block = cfg.extra.get("force")
    if not isinstance(block, dict) or "p" not in block:
        raise ConfigError("force needs a block {\"p\": ..., \"then\": <command>}")
    then = block.get("then", "phase-report")
    if then not in HANDLERS or then == "force":
        raise ConfigError(f"force cannot run {then!r}")
    p = float(block["p"])
    if not 0.5 < p < 1.0:
        raise ConfigError("force needs 1/2 < p < 1")
    cfg.law = BiasedRW(p)
    # a force model at u is the pinning model at u - log(2)/beta
    return HANDLERS[then](cfg, math.log(2.0) / cfg.beta)


HANDLERS = {
    "rate": cmd_rate,
    "annealed": cmd_annealed,
    "simulate": cmd_simulate,
    "critical": cmd_critical,
    "phase-report": cmd_phase_report,
    "dp": cmd_dp,
    "force": cmd_force,
    "scan": cmd_scan,
}


def run(command: str, cfg: ExperimentConfig) -> Artifacts:
    """Compute every artifact of ``command`` and write them.

    Nothing is written unless every computation succeeds. Without a
    configured path the CSV (or else the JSON) goes to standard output.
    """
    arts = HANDLERS[command](cfg)
    pending = []
    if arts.csv is not None:
        pending.append((cfg.csv_path, arts.csv))
    if arts.json is not None:
        pending.append((cfg.json_path, arts.json))
    to_stdout = [t for p, t in pending if p is None]
    for path, text in pending:
        if path is not None:
            atomic_write(path, text)
            log.info("wrote %s", path)
    if to_stdout:
        sys.stdout.write(to_stdout[0])
    return arts


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pinlab",
                                 description="Pinning-model experiments driven by a JSON config.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="experiment JSON file")
    ap.add_argument("--seed", type=int, default=None, help="master seed override")
    ap.add_argument("--workers", type=int, default=None, help="replica worker threads")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.seed, args.workers)
        run(args.command, cfg)
    except ConfigError as exc:
        print(f"ConfigError: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (PinlabError, ValueError) as exc:
        # parameters outside what the command supports: a configuration problem
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
