"""Reproducible command-line experiment runner.

    sbfmc <command> --config <path> [--seed <u64>] [--out <path>]

Commands: rates, gaps, verify, ber, solve-cov.  Configs are flat
``key = value`` text files (lists comma-separated, ``#`` comments); every
command is a pure function of (config, seed) and emits CSV with 17
significant digits, so reruns are byte-identical for any SBF_THREADS value.

Exit codes: 0 all checks pass, 1 tolerance failure, 2 input error.

Stream layout: channel realizations draw from stream_id 0; verify rows use
stream_id (1 << 32) + row; BER rows use stream_id (2 << 32) + row with one
sub-stream per frame.
"""

import argparse
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import capacity, linksim, rates, sampling
from .gainlaws import MixtureGain, truncation_point
from .hypoexp import ExponentialMixture
from .linksim import SchemeConfig, make_constellation, n_workers
from .quadrature import adaptive_gauss_legendre
from .sampling import SeededStream

LN2 = math.log(2.0)

_VERIFY_ROW_BASE = 1 << 32
_BER_ROW_BASE = 2 << 32

_DEFAULT_SCHEMES = (
    "mc",
    "gauss_sbf",
    "ellip_sbf",
    "gauss_sbf_alamouti",
    "ellip_sbf_alamouti",
)

_RATE_FNS = {
    "mc": rates.rate_mc,
    "gauss_sbf": rates.rate_sbf_gauss,
    "ellip_sbf": rates.rate_sbf_ellip,
    "gauss_sbf_alamouti": rates.rate_sbf_alam_gauss,
    "ellip_sbf_alamouti": rates.rate_sbf_alam_ellip,
}


class ConfigError(Exception):
    pass


@dataclass
class ExperimentConfig:
    n: int = 4
    m: int = 16
    m_grid: list = field(default_factory=list)
    power_db: list = field(default_factory=lambda: [10.0])
    schemes: list = field(default_factory=lambda: list(_DEFAULT_SCHEMES))
    constellation: str = "qpsk"
    seed: int = 0
    n_samples: int = 100_000
    n_frames: int = 20
    n_realizations: int = 100
    rank: int = 3
    rho_min: float = 1.0
    frame_length: int = 0  # 0 = constellation default (1440 QPSK, 720 16-QAM)
    solver_tol: float = 1e-6
    solver_max_iter: int = 100_000
    output: str = "-"

    def resolved_frame_length(self):
        if self.frame_length > 0:
            return self.frame_length
        return 720 if self.constellation in ("qam16", "16qam") else 1440


_INT_KEYS = {"n", "m", "seed", "n_samples", "n_frames", "n_realizations", "rank",
             "frame_length", "solver_max_iter"}
_FLOAT_KEYS = {"rho_min", "solver_tol"}
_LIST_FLOAT_KEYS = {"power_db"}
_LIST_INT_KEYS = {"m_grid"}
_LIST_STR_KEYS = {"schemes"}
_STR_KEYS = {"constellation", "output"}


def parse_config(text):
    """Parse the flat key-value config format."""
    cfg = ExperimentConfig()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            if key in _INT_KEYS:
                setattr(cfg, key, int(value))
            elif key in _FLOAT_KEYS:
                setattr(cfg, key, float(value))
            elif key in _LIST_FLOAT_KEYS:
                setattr(cfg, key, [float(v) for v in value.split(",") if v.strip()])
            elif key in _LIST_INT_KEYS:
                setattr(cfg, key, [int(v) for v in value.split(",") if v.strip()])
            elif key in _LIST_STR_KEYS:
                setattr(cfg, key, [v.strip() for v in value.split(",") if v.strip()])
            elif key in _STR_KEYS:
                setattr(cfg, key, value)
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except ValueError as ex:
            raise ConfigError(f"line {lineno}: bad value for {key}: {ex}") from ex
    if not cfg.power_db:
        raise ConfigError("power_db must be non-empty")
    if sorted(cfg.power_db) != cfg.power_db:
        raise ConfigError("power_db must be sorted ascending")
    if cfg.n < 1 or cfg.m < 1 or cfg.rank < 1:
        raise ConfigError("n, m and rank must be >= 1")
    return cfg


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _csv(header, row_iter):
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in row_iter)
    return "\n".join(lines) + "\n"


def db_to_linear(p_db):
    return 10.0 ** (p_db / 10.0)


def _solve_realizations(cfg, m):
    """Channel set, covariance solution and gains for every realization of
    an M-user population; realization j draws from channel sub-stream
    indexed by (m, j)."""
    out = []
    base = SeededStream(cfg.seed, 0)
    for j in range(cfg.n_realizations):
        rng = base.substream(m * 1_000_000 + j)
        ch = sampling.ChannelSet(sampling.randn_complex(rng, m, cfg.n))
        sol = capacity.solve_mc_covariance(ch, tol=cfg.solver_tol, max_iter=cfg.solver_max_iter)
        rho, rho_min = capacity.rho_values(sol.covariance, ch)
        rank = sampling.psd_sqrt(sol.covariance.entries)[1]
        out.append((ch, sol, rho_min, rank))
    return out


def cmd_rates(cfg):
    """Average closed-form multicast rates over channel realizations, per
    scheme and per (M, P) grid point."""
    header = ["scheme", "N", "M", "P_dB", "rate_nats", "rate_bits", "stderr", "status"]
    m_values = cfg.m_grid or [cfg.m]
    rows = []
    for m in m_values:
        reals = _solve_realizations(cfg, m)
        n_bad = sum(0 if sol.converged else 1 for _, sol, _, _ in reals)
        status = "ok" if n_bad == 0 else f"noconv:{n_bad}"
        for p_db in cfg.power_db:
            power = db_to_linear(p_db)
            for scheme in cfg.schemes:
                if scheme not in _RATE_FNS:
                    raise ConfigError(f"unknown rate scheme {scheme!r}")
                vals = []
                n_skipped = 0
                for _, sol, rho_min, rank in reals:
                    if scheme == "ellip_sbf_alamouti" and rank < 2:
                        n_skipped += 1  # degenerate: that law needs rank >= 2
                        continue
                    p = rates.SchemeParams(rho_min, power, max(rank, 1))
                    vals.append(_RATE_FNS[scheme](p))
                row_status = status if not n_skipped else f"{status};rank1:{n_skipped}"
                if not vals:
                    rows.append([scheme, cfg.n, m, p_db, math.nan, math.nan, 0.0,
                                 row_status])
                    continue
                vals = np.asarray(vals)
                mean = vals.mean()
                se = vals.std(ddof=1) / math.sqrt(len(vals)) if len(vals) > 1 else 0.0
                rows.append([scheme, cfg.n, m, p_db, mean, mean / LN2, se, row_status])
    return _csv(header, rows), 0


def cmd_gaps(cfg):
    """Rate gap to the worst-user bound per scheme and power, with the
    asymptotic limit and the remaining distance to it."""
    header = ["scheme", "rank", "rho_min", "P_dB", "gap_nats", "limit", "delta_to_limit"]
    rows = []
    for scheme in cfg.schemes:
        if scheme == "mc":
            continue
        if scheme not in rates.GAP_SCHEMES:
            raise ConfigError(f"unknown gap scheme {scheme!r}")
        rank = 1 if scheme == "gauss_sbf" or scheme == "gauss_sbf_alamouti" else cfg.rank
        limit = rates.gap_limit(scheme, rank)
        for p_db in cfg.power_db:
            power = db_to_linear(p_db)
            p = rates.SchemeParams(cfg.rho_min, power, rank)
            gap = rates.rate_mc(p) - _RATE_FNS[scheme](p)
            rows.append([scheme, rank, cfg.rho_min, p_db, gap, limit, gap - limit])
    return _csv(header, rows), 0


_QUAD_TOL = 1e-8
_MC_SIGMAS = 3.0


def _verify_row(cfg, scheme, rank, p_db, row_idx):
    power = db_to_linear(p_db)
    rho = cfg.rho_min
    stream = SeededStream(cfg.seed, _VERIFY_ROW_BASE + row_idx)
    rng = stream.generator()
    if scheme == "bingham_phi":
        # quadrature target is the log moment int log(z) p(z) dz itself
        lam = np.full(rank, 1.0 / rank)
        mix = ExponentialMixture.from_weights(lam)
        closed = rates.phi_exp_mixture(mix)
        upper = truncation_point(MixtureGain(mix))
        quad, _ = adaptive_gauss_legendre(
            lambda z: np.log(np.maximum(z, 1e-300)) * mix.pdf(z), 0.0, upper, tol=1e-10
        )
        draws = mix.sample(rng, cfg.n_samples)
        vals = np.log(draws)
    else:
        p = rates.SchemeParams(rho, power, rank)
        closed = _RATE_FNS[scheme](p)
        law = rates.gain_law_for_scheme(scheme, rank)
        quad = rates.quadrature_rate_oracle(law, rho, power, tol=1e-10)
        draws = sampling.sample_effective_gain(law, rng, cfg.n_samples)
        vals = np.log1p(rho * power * draws)
    mc = float(vals.mean())
    mc_se = float(vals.std(ddof=1) / math.sqrt(vals.size))
    quad_diff = abs(closed - quad)
    mc_dev = abs(closed - mc) / mc_se if mc_se > 0 else 0.0
    ok = quad_diff <= _QUAD_TOL and mc_dev <= _MC_SIGMAS
    return [scheme, rank, rho, p_db, closed, quad, mc, mc_se, quad_diff, mc_dev, ok]


def cmd_verify(cfg):
    """Oracle triangle: closed form vs quadrature vs Monte Carlo for every
    scheme and power point; exit code 1 when any row fails."""
    if cfg.n_samples < 1000:
        raise ConfigError("verify needs n_samples >= 1000")
    header = ["scheme", "rank", "rho", "P_dB", "closed_form", "quadrature",
              "mc_estimate", "mc_stderr", "quad_abs_diff", "mc_dev_se", "pass"]
    tasks = []
    for scheme in cfg.schemes:
        if scheme == "mc":
            continue
        if scheme == "bingham_phi":
            tasks.append((scheme, cfg.rank, cfg.power_db[0]))
            continue
        if scheme not in rates.GAP_SCHEMES:
            raise ConfigError(f"unknown verify scheme {scheme!r}")
        rank = 1 if scheme.startswith("gauss") else cfg.rank
        for p_db in cfg.power_db:
            tasks.append((scheme, rank, p_db))

    def run(idx):
        scheme, rank, p_db = tasks[idx]
        return _verify_row(cfg, scheme, rank, p_db, idx)

    workers = min(n_workers(), len(tasks))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, range(len(tasks))))
    else:
        rows = [run(i) for i in range(len(tasks))]
    code = 0 if all(row[-1] for row in rows) else 1
    return _csv(header, rows), code


def cmd_ber(cfg):
    """Worst-user uncoded BER sweeps over the power grid for each scheme,
    on one channel realization per M."""
    header = ["scheme", "N", "M", "P_dB", "constellation", "worst_user_ber",
              "stderr", "bits", "status"]
    m_values = cfg.m_grid or [cfg.m]
    con = make_constellation(cfg.constellation)
    t_len = cfg.resolved_frame_length()
    rows = []
    row_idx = 0
    for m in m_values:
        rng = SeededStream(cfg.seed, 0).substream(m * 1_000_000)
        ch = sampling.ChannelSet(sampling.randn_complex(rng, m, cfg.n))
        sol = capacity.solve_mc_covariance(ch, tol=cfg.solver_tol, max_iter=cfg.solver_max_iter)
        status = "ok" if sol.converged else "noconv"
        for p_db in cfg.power_db:
            for scheme in cfg.schemes:
                if scheme == "mc":
                    continue
                sim_cfg = SchemeConfig(
                    scheme, sol.covariance, con, db_to_linear(p_db), t_len
                )
                stream = SeededStream(cfg.seed, _BER_ROW_BASE + row_idx)
                res = linksim.simulate_worst_user_ber(sim_cfg, ch, cfg.n_frames, stream)
                rows.append([scheme, cfg.n, m, p_db, con.name, res.worst_user_ber,
                             res.worst_user_stderr, res.bits_simulated, status])
                row_idx += 1
    return _csv(header, rows), 0


def cmd_solve_cov(cfg):
    """Solve the max-min covariance for one channel draw and dump W*, the
    per-user gains and solver status."""
    rng = SeededStream(cfg.seed, 0).substream(0)
    ch = sampling.ChannelSet(sampling.randn_complex(rng, cfg.m, cfg.n))
    sol = capacity.solve_mc_covariance(ch, tol=cfg.solver_tol, max_iter=cfg.solver_max_iter)
    rho, rho_min = capacity.rho_values(sol.covariance, ch)
    header = ["kind", "i", "j", "value_re", "value_im"]
    rows = []
    w = sol.covariance.entries
    for i in range(cfg.n):
        for j in range(cfg.n):
            rows.append(["W", i, j, w[i, j].real, w[i, j].imag])
    for i, r in enumerate(rho):
        rows.append(["rho", i, 0, r, 0.0])
    rows.append(["rho_min", 0, 0, rho_min, 0.0])
    rows.append(["objective", 0, 0, sol.objective, 0.0])
    rows.append(["gap", 0, 0, sol.gap, 0.0])
    rows.append(["converged", 0, 0, 1.0 if sol.converged else 0.0, 0.0])
    return _csv(header, rows), 0


_COMMANDS = {
    "rates": cmd_rates,
    "gaps": cmd_gaps,
    "verify": cmd_verify,
    "ber": cmd_ber,
    "solve-cov": cmd_solve_cov,
}


def main(argv=None):
    parser = argparse.ArgumentParser(prog="sbfmc", description=__doc__)
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="flat key=value config file")
    parser.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    parser.add_argument("--out", default=None, help="output CSV path (default: config/stdout)")
    args = parser.parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = parse_config(fh.read())
    except (OSError, ConfigError) as ex:
        print(f"error: {ex}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.seed = args.seed
    try:
        text, code = _COMMANDS[args.command](cfg)
    except (ConfigError, ValueError) as ex:
        print(f"error: {ex}", file=sys.stderr)
        return 2
    dest = args.out or cfg.output
    if dest in ("-", ""):
        sys.stdout.write(text)
    else:
        with open(dest, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
