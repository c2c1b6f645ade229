"""Experiment pipeline: measurements, degradation, batch runs and reports."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .divergence import Measurements
from .errors import DivergedRunError, InvalidConfigurationError
from .grid import Setup, load_grid, resolve
from .metrics import SNR_CAP_DB, snr, spectral_convergence
from .signals import SynthSpec, synth_signal
from .solvers import SolverConfig, random_phase_init, run_setup
from .stft import StftPlan, TimeSignal, make_plan, stft
from .wavio import load_wav, write_wav

log = logging.getLogger(__name__)

CSV_COLUMNS = ("input", "algo", "family", "direction", "d", "iters", "condition", "sc",
               "snr_db", "snr_improvement_db", "wall_ms", "seed", "diverged")
WIENER_EPS = 1e-12


def measure(x, plan: StftPlan, d: int = 1) -> Measurements:
    """Exact measurements ``|stft(x)|^d`` of a (padded or unpadded) signal."""
    X = stft(plan, plan.pad(x))
    return Measurements(np.abs(X) ** d, d)


def derive_rng(seed: int, input_id: str, condition: str, stream: str) -> np.random.Generator:
    """Independent generator per (seed, input, condition, stream)."""
    key = tuple(zlib.crc32(s.encode()) for s in (input_id, condition, stream))
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def degrade(x, input_snr_db: float, plan: StftPlan, seed=0) -> Measurements:
    """Noisy-then-Wiener-filtered magnitude spectrogram (d = 1).

    White Gaussian noise is scaled so the mixture has exactly ``input_snr_db``
    and added on the signal's support; the oracle mask
    ``|S|^2 / (|S|^2 + |N|^2)`` is applied to the mixture STFT.
    ``input_snr_db = inf`` adds no noise.
    """
    xp = plan.pad(x)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    lo = plan.offset if plan.signal_length is not None else 0
    hi = lo + plan.signal_length if plan.signal_length is not None else xp.size
    noise = np.zeros_like(xp)
    if np.isfinite(input_snr_db):
        raw = rng.standard_normal(hi - lo)
        target = np.linalg.norm(xp) / 10.0 ** (input_snr_db / 20.0)
        noise[lo:hi] = raw * (target / np.linalg.norm(raw))
    S = stft(plan, xp)
    N = stft(plan, noise)
    ps, pn = np.abs(S) ** 2, np.abs(N) ** 2
    den = ps + pn
    gain = np.where(den > 0, ps / (den + WIENER_EPS * (pn > 0)), 0.0)
    return Measurements(np.abs(gain * (S + N)), 1)


def realized_snr_db(x, noisy) -> float:
    x = np.asarray(x)
    return 10.0 * np.log10(np.sum(x ** 2) / np.sum((np.asarray(noisy) - x) ** 2))


@dataclass
class ExperimentConfig:
    """Batch specification.

    ``inputs`` holds WAV paths, :class:`~bregpr.signals.SynthSpec` objects or
    ``(input_id, TimeSignal)`` pairs.
    """

    inputs: list
    algorithms: list[str] | None = None
    protocol: str = "exact"
    input_snrs: list[float] = field(default_factory=list)
    win_len: int = 1024
    hop: int = 512
    fft_size: int | None = None
    sample_rate: int = 22050
    iterations: int = 2500
    seed: int = 0
    trace_period: int = 10
    mu: float | None = None
    rho: float | None = None
    gamma: float | None = None
    d: int | None = None
    convention: str | None = None
    momentum_start: str = "init"
    grid_path: str | None = None
    output: str | None = None
    write_wavs: bool = False
    dump_traces: bool = False

    def validate(self):
        if not self.inputs:
            raise InvalidConfigurationError("at least one input is required")
        if self.algorithms is not None and not self.algorithms:
            raise InvalidConfigurationError("at least one algorithm is required")
        if self.protocol not in ("exact", "degraded"):
            raise InvalidConfigurationError(f"unknown protocol {self.protocol!r}")
        if self.protocol == "degraded" and not self.input_snrs:
            raise InvalidConfigurationError("the degraded protocol needs at least one input SNR")
        if self.iterations < 0:
            raise InvalidConfigurationError("iterations must be >= 0")


@dataclass
class ReportRow:
    input: str
    algo: str
    family: str
    direction: str
    d: int | str
    iters: int
    condition: str
    sc: float
    snr_db: float
    snr_improvement_db: float
    wall_ms: float
    seed: int
    diverged: bool
    init_sha: str = ""
    sc_magnitude: float = float("nan")


@dataclass
class ExperimentResult:
    rows: list[ReportRow]
    traces: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def all_diverged(self) -> bool:
        runs = [r for r in self.rows if r.algo != "INIT"]
        return bool(runs) and all(r.diverged for r in runs)


def condition_label(input_snr_db: float | None) -> str:
    if input_snr_db is None:
        return "exact"
    if not np.isfinite(input_snr_db):
        return "snr+inf"
    return f"snr{input_snr_db:+g}"


def _resolve_inputs(cfg: ExperimentConfig) -> list[tuple[str, TimeSignal]]:
    out = []
    for item in cfg.inputs:
        if isinstance(item, SynthSpec):
            out.append((item.input_id, synth_signal(item, cfg.sample_rate, min_length=2 * cfg.win_len)))
        elif isinstance(item, tuple):
            out.append((str(item[0]), item[1]))
        else:
            path = Path(item)
            out.append((path.stem, load_wav(path, expected_rate=cfg.sample_rate)))
    ids = [i for i, _ in out]
    if len(set(ids)) != len(ids):
        raise InvalidConfigurationError(f"duplicate input ids: {ids}")
    return out


def _setups(cfg: ExperimentConfig) -> list[Setup]:
    grid = load_grid(cfg.grid_path)
    codes = list(grid) if cfg.algorithms is None else cfg.algorithms
    setups = []
    for code in codes:
        s = resolve(code, grid)
        kw = {}
        if s.kind == "gradient":
            kw.update(mu=cfg.mu, gamma=cfg.gamma, d=cfg.d, convention=cfg.convention)
        elif s.kind == "admm":
            kw.update(rho=cfg.rho, convention=cfg.convention)
        elif s.kind == "fgla":
            kw.update(gamma=cfg.gamma)
        setups.append(s.with_overrides(**kw))
    if not any(s.kind == "init" for s in setups):
        setups.insert(0, resolve("INIT", grid))
    return setups


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        if np.isnan(v):
            return "nan"
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def rows_to_csv(rows, include_wall: bool = True) -> str:
    buf = io.StringIO()
    cols = [c for c in CSV_COLUMNS if include_wall or c != "wall_ms"]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in cols])
    return buf.getvalue()


def _row_json(r: ReportRow) -> dict:
    out = {}
    for k, v in asdict(r).items():
        if isinstance(v, float) and not np.isfinite(v):
            v = _fmt(v)
        out[k] = v
    return out


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run every (input, condition, algorithm) cell and collect report rows.

    All algorithms of one (input, condition) start from the same random-phase
    signal. Diverged runs are flagged, never fatal.
    """
    cfg.validate()
    setups = _setups(cfg)
    inputs = _resolve_inputs(cfg)
    conditions = [None] if cfg.protocol == "exact" else list(cfg.input_snrs)
    order = {s.code: i for i, s in enumerate(setups)}
    rows, traces = [], {}
    solver_cfg = SolverConfig(iterations=cfg.iterations, seed=cfg.seed,
                              trace_period=cfg.trace_period, momentum_start=cfg.momentum_start)
    out_dir = Path(cfg.output) if cfg.output else None
    for input_id, sig in inputs:
        plan = make_plan(len(sig), cfg.win_len, cfg.hop, cfg.fft_size)
        x_star = plan.pad(sig.samples)
        for snr_in in conditions:
            cond = condition_label(snr_in)
            if snr_in is None:
                R1 = measure(x_star, plan, 1)
            else:
                R1 = degrade(x_star, snr_in, plan, derive_rng(cfg.seed, input_id, cond, "noise"))
            R = {1: R1, 2: Measurements(R1.values ** 2, 2)}
            _, x0 = random_phase_init(R1, plan, derive_rng(cfg.seed, input_id, cond, "phase"))
            init_sha = hashlib.sha256(x0.tobytes()).hexdigest()[:16]
            snr0 = float(snr(x_star, x0))
            sc0 = {d: float(spectral_convergence(R[d], x0, plan)) for d in (1, 2)}
            for s in setups:
                if s.kind == "init":
                    rows.append(ReportRow(input_id, s.code, "-", "-", "-", 0, cond, sc0[1], snr0, 0.0,
                                          0.0, cfg.seed, False, init_sha, sc0[1]))
                    continue
                diverged = False
                try:
                    rep = run_setup(s, R[s.d], plan, x0, solver_cfg)
                except DivergedRunError as exc:
                    log.warning("%s / %s / %s: %s", input_id, cond, s.code, exc)
                    rep = exc.report
                    diverged = True
                x = rep.final_x
                finite = x is not None and bool(np.all(np.isfinite(x)))
                nan = float("nan")
                sc = float(spectral_convergence(R[s.d], x, plan)) if finite else nan
                scm = float(spectral_convergence(R[1], x, plan)) if finite else nan
                out_snr = float(snr(x_star, x)) if finite else nan
                rows.append(ReportRow(
                    input_id, s.code, s.divergence.label if s.divergence else "quadratic",
                    s.direction or "-", s.d, rep.iterations, cond, sc, out_snr, out_snr - snr0,
                    round(rep.wall_time * 1e3, 3), cfg.seed, diverged, init_sha, scm))
                if cfg.dump_traces:
                    traces[f"{input_id}/{cond}/{s.code}"] = rep.loss_trace
                if cfg.write_wavs and out_dir is not None and finite:
                    write_wav(out_dir / "wavs" / f"{input_id}_{cond}_{s.code}.wav",
                              TimeSignal(plan.crop(x), sig.sample_rate))
    rows.sort(key=lambda r: (r.input, r.condition, order[r.algo]))
    metadata = {
        "version": __version__,
        "snr_cap_db": SNR_CAP_DB,
        "border_frames": "included in all metrics",
        "sc_note": "sc uses ||R|| as denominator; for d=2 rows it mixes power and magnitude units; "
                   "sc_magnitude is computed against the d=1 spectrogram for every row",
        "wiener": "same STFT plan as reconstruction; mask |S|^2/(|S|^2+|N|^2)",
        "stft": {"window": "sine-bell", "win_len": cfg.win_len, "hop": cfg.hop,
                 "fft_size": cfg.fft_size or cfg.win_len, "normalization": "unitary"},
    }
    config_echo = {k: v for k, v in asdict(cfg).items()}
    config_echo["inputs"] = [i for i, _ in inputs]
    config_echo["algorithms"] = [s.code for s in setups]
    config_echo["setups"] = {}
    for s in setups:
        echo = asdict(s)
        M = cfg.fft_size or cfg.win_len
        if s.mu is not None:
            echo["effective_mu"] = s.effective_mu(M)
        if s.rho is not None:
            echo["effective_rho"] = s.effective_rho(M)
        config_echo["setups"][s.code] = echo
    result = ExperimentResult(rows, traces, metadata, config_echo)
    if out_dir is not None:
        write_reports(result, out_dir)
    return result


def write_reports(result: ExperimentResult, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.csv").write_text(rows_to_csv(result.rows), encoding="utf-8")
    doc = {"version": __version__, "config": result.config, "metadata": result.metadata,
           "rows": [_row_json(r) for r in result.rows]}
    (out_dir / "report.json").write_text(json.dumps(doc, indent=2, default=str), encoding="utf-8")
    if result.traces:
        (out_dir / "traces.json").write_text(json.dumps(result.traces), encoding="utf-8")
