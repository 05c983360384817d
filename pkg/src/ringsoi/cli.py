"""Command line front end.

Subcommands: spectrum, floquet, evolve, fourier, revival, bessel-debug.
Configuration is a flat key=value file; values can come from a packaged
preset (--preset), a config file (--config), and key=value overrides on the
command line, later sources winning. All outputs are deterministic CSV
tables with a JSON metadata line (see io module). Exit codes: 0 success,
2 invalid input, 3 numerical failure.

Common keys: rho, quad_order, basis (static | floquet); static physics:
soi, m_min, m_max, eps_max; driven physics: amp, offset, nu, k_max.
Initial states: initial = gaussian (center_r, center_phi, sigma_r,
sigma_phi, spin_up_re/_im, spin_dn_re/_im) or initial = modes
(initial_modes = "n,kappa,branch,re,im;..."). Probing and analysis:
probe_r, probe_phi, observable, tau_max, n_samples, snapshot_taus,
window, avg_window, norm_floor.
"""

import argparse
import json
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .dynamics import (SpinorField, StateExpansion, autocorrelation, evolve,
                       expand_state, field_of_mode, fourier_spectrum,
                       gaussian_packet, moving_average, observables,
                       revival_estimate, time_series)
from .errors import (ContractError, DomainError, NumericalError,
                     TruncationError, ValidationError)
from .floquet import (Drive, build_floquet_mode, natural_branch,
                      scan_floquet_spectrum, sideband_weights)
from .geometry import PolarGrid, RingGeometry, make_quadrature
from .io import validate_table, write_table
from .specfun import bessel_j, bessel_n, wronskian_defect
from .spectrum import scan_spectrum

_COMMANDS = ("spectrum", "floquet", "evolve", "fourier", "revival",
             "bessel-debug")


class Config:
    """Flat string map with typed, validating accessors."""

    def __init__(self, entries=None):
        self.entries = dict(entries or {})

    def merge(self, other: dict):
        self.entries.update(other)

    def _fetch(self, key, default, required):
        if key in self.entries:
            return self.entries[key]
        if required:
            raise ValidationError(f"missing required config key {key!r}")
        return default

    def get_str(self, key, default=None, required=False):
        val = self._fetch(key, default, required)
        return val if val is None else str(val)

    def get_float(self, key, default=None, required=False):
        val = self._fetch(key, default, required)
        if val is None:
            return None
        try:
            return float(val)
        except (TypeError, ValueError):
            raise ValidationError(f"config key {key!r} is not a number: {val!r}")

    def get_int(self, key, default=None, required=False):
        val = self._fetch(key, default, required)
        if val is None:
            return None
        try:
            fval = float(val)
        except (TypeError, ValueError):
            raise ValidationError(f"config key {key!r} is not an integer: {val!r}")
        if fval != int(fval):
            raise ValidationError(f"config key {key!r} is not an integer: {val!r}")
        return int(fval)

    def get_floats(self, key, default=None, required=False):
        val = self._fetch(key, default, required)
        if val is None:
            return None
        if isinstance(val, (list, tuple)):
            return [float(v) for v in val]
        return [float(p) for p in str(val).split(";") if p.strip()]


def parse_config_text(text, source="<config>") -> dict:
    """Parse flat key=value lines; # starts a comment, blanks ignored."""
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ValidationError(f"{source}:{lineno}: empty key")
        entries[key] = value.strip()
    return entries


def load_preset(name) -> dict:
    from importlib import resources
    ref = resources.files(__package__) / "presets" / f"{name}.cfg"
    if not ref.is_file():
        have = sorted(p.name[:-4] for p in (resources.files(__package__) / "presets").iterdir()
                      if p.name.endswith(".cfg"))
        raise ValidationError(f"unknown preset {name!r}; available: {', '.join(have)}")
    return parse_config_text(ref.read_text(), source=f"preset {name}")


def _geometry(cfg: Config) -> RingGeometry:
    return RingGeometry(cfg.get_float("rho", required=True))


def _sector_range(cfg: Config):
    m_min = cfg.get_int("m_min", required=True)
    m_max = cfg.get_int("m_max", required=True)
    if m_min > m_max:
        raise ValidationError(f"empty sector range m_min={m_min} > m_max={m_max}")
    return range(m_min, m_max + 1)


def _thread_map(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def cmd_spectrum(cfg: Config, out_dir, threads) -> int:
    geom = _geometry(cfg)
    soi = cfg.get_float("soi", required=True)
    eps_max = cfg.get_float("eps_max", required=True)
    sectors = list(_sector_range(cfg))
    q = make_quadrature(cfg.get_int("quad_order", 128), geom)

    per_sector = _thread_map(lambda m: scan_spectrum(m, eps_max, soi, geom, q),
                             sectors, threads)
    cols = {k: [] for k in ("m", "kappa", "n", "branch", "energy", "k_plus",
                            "k_minus", "boundary_residual", "degeneracy")}
    for m, modes in zip(sectors, per_sector):
        for md in modes:
            cols["m"].append(md.m)
            cols["kappa"].append(md.kappa)
            cols["n"].append(md.n)
            cols["branch"].append(md.branch)
            cols["energy"].append(md.energy)
            cols["k_plus"].append(md.k_plus)
            cols["k_minus"].append(md.k_minus)
            cols["boundary_residual"].append(md.norm_certificate.boundary_residual)
            cols["degeneracy"].append(2 if soi == 0.0 else 1)
    meta = {"kind": "spectrum", "rho": geom.rho, "soi": soi,
            "eps_max": eps_max, "m_min": sectors[0], "m_max": sectors[-1]}
    write_table(os.path.join(out_dir, "spectrum.csv"), meta, cols)
    return 0


def cmd_floquet(cfg: Config, out_dir, threads) -> int:
    geom = _geometry(cfg)
    k_max = cfg.get_float("k_max", required=True)
    nu = cfg.get_float("nu", required=True)
    amp = cfg.get_float("amp", required=True)
    offset = cfg.get_float("offset", 0.0)
    drive = Drive(amp=amp, offset=offset, nu=nu)
    sectors = list(_sector_range(cfg))

    per_sector = _thread_map(lambda m: scan_floquet_spectrum(m, k_max, geom),
                             sectors, threads)
    cols = {k: [] for k in ("m", "kappa", "n", "branch", "k", "quasienergy",
                            "reduced_quasienergy", "degeneracy")}
    side = {k: [] for k in ("m", "n", "k", "alpha", "weight")}
    q = make_quadrature(cfg.get_int("quad_order", 128), geom)
    for m, entries in zip(sectors, per_sector):
        for ent in entries:
            branch = natural_branch(ent.family)
            cols["m"].append(ent.m)
            cols["kappa"].append(ent.kappa)
            cols["n"].append(ent.n)
            cols["branch"].append(branch)
            cols["k"].append(ent.k)
            cols["quasienergy"].append(ent.quasienergy)
            cols["reduced_quasienergy"].append(ent.reduced_quasienergy(nu))
            cols["degeneracy"].append(ent.degeneracy)
            mode = build_floquet_mode(ent.k, branch, m, drive, geom, q, n=ent.n)
            table = sideband_weights(mode)
            for alpha in table.alphas():
                side["m"].append(m)
                side["n"].append(ent.n)
                side["k"].append(ent.k)
                side["alpha"].append(alpha)
                side["weight"].append(table.weight(alpha))
    meta = {"kind": "floquet-spectrum", "rho": geom.rho, "k_max": k_max,
            "amp": amp, "offset": offset, "nu": nu,
            "m_min": sectors[0], "m_max": sectors[-1]}
    write_table(os.path.join(out_dir, "quasienergies.csv"), meta, cols)
    side_meta = dict(meta, kind="sidebands")
    write_table(os.path.join(out_dir, "sidebands.csv"), side_meta, side)
    return 0


def _build_basis(cfg: Config, threads):
    """Mode set, grid, and quadrature shared by the evolution commands."""
    geom = _geometry(cfg)
    basis = cfg.get_str("basis", "static")
    sectors = list(_sector_range(cfg))
    q = make_quadrature(cfg.get_int("quad_order", 128), geom)
    band = max(abs(sectors[0]), abs(sectors[-1])) + 1
    grid = PolarGrid.build(q, band)

    if basis == "static":
        soi = cfg.get_float("soi", required=True)
        eps_max = cfg.get_float("eps_max", required=True)
        per_sector = _thread_map(lambda m: scan_spectrum(m, eps_max, soi, geom, q),
                                 sectors, threads)
        modes = [md for sector in per_sector for md in sector]
        physics = {"basis": "static", "soi": soi, "eps_max": eps_max}
    elif basis == "floquet":
        nu = cfg.get_float("nu", required=True)
        amp = cfg.get_float("amp", required=True)
        offset = cfg.get_float("offset", 0.0)
        k_max = cfg.get_float("k_max", required=True)
        drive = Drive(amp=amp, offset=offset, nu=nu)
        per_sector = _thread_map(lambda m: scan_floquet_spectrum(m, k_max, geom),
                                 sectors, threads)
        modes = []
        for m, entries in zip(sectors, per_sector):
            for ent in entries:
                modes.append(build_floquet_mode(
                    ent.k, natural_branch(ent.family), m, drive, geom, q,
                    n=ent.n))
        physics = {"basis": "floquet", "amp": amp, "offset": offset,
                   "nu": nu, "k_max": k_max}
    else:
        raise ValidationError(f"basis must be 'static' or 'floquet', got {basis!r}")
    return geom, q, grid, modes, physics


def _initial_expansion(cfg: Config, geom, q, grid, modes) -> StateExpansion:
    initial = cfg.get_str("initial", required=True)
    norm_floor = cfg.get_float("norm_floor", 0.999)
    if initial == "gaussian":
        center = (cfg.get_float("center_r", required=True),
                  cfg.get_float("center_phi", 0.0))
        widths = (cfg.get_float("sigma_r", required=True),
                  cfg.get_float("sigma_phi", required=True))
        spin = (complex(cfg.get_float("spin_up_re", 1.0),
                        cfg.get_float("spin_up_im", 0.0)),
                complex(cfg.get_float("spin_dn_re", 0.0),
                        cfg.get_float("spin_dn_im", 0.0)))
        psi0 = gaussian_packet(center, widths, spin, geom, grid)
        exp = expand_state(psi0, modes, q, norm_floor=norm_floor)
        if exp.captured_norm < norm_floor:
            raise TruncationError(
                f"expansion captured only {exp.captured_norm:.6f} "
                f"(floor {norm_floor}); enlarge the basis cutoffs")
        return exp
    if initial == "modes":
        spec_text = cfg.get_str("initial_modes", required=True)
        wanted = []
        for part in spec_text.split(";"):
            part = part.strip()
            if not part:
                continue
            fields = part.split(",")
            if len(fields) != 5:
                raise ValidationError(
                    f"initial_modes entry {part!r}: need n,kappa,branch,re,im")
            n, kappa, branch = int(fields[0]), float(fields[1]), int(fields[2])
            weight = complex(float(fields[3]), float(fields[4]))
            wanted.append((n, kappa, branch, weight))
        if not wanted:
            raise ValidationError("initial_modes is empty")
        chosen, weights = [], []
        for n, kappa, branch, weight in wanted:
            matches = [md for md in modes
                       if md.n == n and md.kappa == kappa and md.branch == branch]
            if not matches:
                raise ValidationError(
                    f"no basis mode with n={n}, kappa={kappa}, branch={branch:+d}")
            chosen.append(matches[0])
            weights.append(weight)
        weights = np.array(weights, dtype=complex)
        weights = weights / np.linalg.norm(weights)
        kind = "floquet" if cfg.get_str("basis", "static") == "floquet" else "static"
        return StateExpansion(basis_kind=kind, modes=tuple(chosen),
                              coefficients=weights,
                              captured_norm=float(np.sum(np.abs(weights) ** 2)),
                              grid=grid, quadrature=q)
    raise ValidationError(f"initial must be 'gaussian' or 'modes', got {initial!r}")


def _tau_grid(cfg: Config):
    tau_max = cfg.get_float("tau_max", required=True)
    n_samples = cfg.get_int("n_samples", required=True)
    if tau_max <= 0 or n_samples < 16:
        raise ValidationError("need tau_max > 0 and n_samples >= 16")
    return np.linspace(0.0, tau_max, n_samples)


def _predicted_max_frequency(exp: StateExpansion) -> float:
    freqs = exp.frequencies()
    spread = float(np.max(freqs) - np.min(freqs)) if freqs.size > 1 else 0.0
    if exp.basis_kind == "floquet":
        drive = exp.modes[0].drive
        z_max = max(drive.amp * md.k / drive.nu for md in exp.modes)
        spread += (2.0 * z_max + 10.0) * drive.nu
    return spread


def _series(cfg: Config, exp: StateExpansion, taus):
    probe = (cfg.get_float("probe_r", 0.75), cfg.get_float("probe_phi", 0.0))
    selector = cfg.get_str("observable", "density")
    dt = taus[1] - taus[0]
    predicted = _predicted_max_frequency(exp)
    if predicted >= 0.95 * np.pi / dt:
        raise ValidationError(
            f"time step {dt:.6g} undersamples predicted content up to "
            f"{predicted:.6g} (angular); increase n_samples")
    return probe, selector, time_series(exp, probe, selector, taus)


def cmd_evolve(cfg: Config, out_dir, threads) -> int:
    geom, q, grid, modes, physics = _build_basis(cfg, threads)
    exp = _initial_expansion(cfg, geom, q, grid, modes)
    taus = _tau_grid(cfg)
    probe, selector, values = _series(cfg, exp, taus)

    meta = {"kind": "series", "rho": geom.rho, "observable": selector,
            "probe_r": probe[0], "probe_phi": probe[1],
            "captured_norm": exp.captured_norm, "n_modes": len(exp.modes)}
    meta.update(physics)
    write_table(os.path.join(out_dir, "series.csv"), meta,
                {"tau": taus, "value": values})

    snap_taus = cfg.get_floats("snapshot_taus", [])
    for idx, tau in enumerate(snap_taus):
        psi = evolve(exp, tau)
        obs = observables(psi)
        rr = np.repeat(grid.radial, grid.n_phi)
        pp = np.tile(grid.phi, grid.n_r)
        snap_meta = {"kind": "field", "tau": tau, "rho": geom.rho,
                     "captured_norm": exp.captured_norm}
        snap_meta.update(physics)
        write_table(os.path.join(out_dir, f"snapshot_{idx:03d}.csv"), snap_meta, {
            "r": rr, "phi": pp,
            "re_up": psi.values[0].real.ravel(),
            "im_up": psi.values[0].imag.ravel(),
            "re_dn": psi.values[1].real.ravel(),
            "im_dn": psi.values[1].imag.ravel(),
            "density": obs.density.ravel(),
            "spin_x": obs.spin_x.ravel(),
            "spin_y": obs.spin_y.ravel(),
            "spin_z": obs.spin_z.ravel(),
        })
    return 0


def cmd_fourier(cfg: Config, out_dir, threads) -> int:
    geom, q, grid, modes, physics = _build_basis(cfg, threads)
    exp = _initial_expansion(cfg, geom, q, grid, modes)
    taus = _tau_grid(cfg)
    probe, selector, values = _series(cfg, exp, taus)

    avg_window = cfg.get_float("avg_window", None)
    if avg_window is not None:
        values = moving_average(taus, values, avg_window)
    spec = fourier_spectrum(taus, values, window=cfg.get_str("window", "hann"))

    meta = {"kind": "series", "rho": geom.rho, "observable": selector,
            "probe_r": probe[0], "probe_phi": probe[1],
            "captured_norm": exp.captured_norm}
    meta.update(physics)
    write_table(os.path.join(out_dir, "series.csv"), meta,
                {"tau": taus, "value": values})
    spec_meta = {"kind": "frequency-spectrum", "rho": geom.rho,
                 "observable": selector, "window": spec.window,
                 "dt": spec.dt, "n_samples": spec.n_samples,
                 "captured_norm": exp.captured_norm}
    spec_meta.update(physics)
    write_table(os.path.join(out_dir, "spectrum.csv"), spec_meta,
                {"frequency": spec.frequencies,
                 "normalized_magnitude": spec.magnitudes})
    return 0


def cmd_revival(cfg: Config, out_dir, threads) -> int:
    geom, q, grid, modes, physics = _build_basis(cfg, threads)
    exp = _initial_expansion(cfg, geom, q, grid, modes)
    taus = _tau_grid(cfg)
    auto = autocorrelation(exp, taus)
    t_rev = revival_estimate(exp)
    meta = {"kind": "autocorrelation", "rho": geom.rho,
            "captured_norm": exp.captured_norm,
            "revival_estimate": t_rev}
    meta.update(physics)
    write_table(os.path.join(out_dir, "autocorrelation.csv"), meta,
                {"tau": taus, "autocorrelation": auto})
    return 0


def cmd_bessel_debug(cfg: Config, out_dir, threads) -> int:
    order = cfg.get_int("order", required=True)
    x_min = cfg.get_float("x_min", 0.1)
    x_max = cfg.get_float("x_max", 50.0)
    n_points = cfg.get_int("n_points", 512)
    if not (0 < x_min < x_max):
        raise ValidationError("need 0 < x_min < x_max")
    x = np.linspace(x_min, x_max, n_points)
    meta = {"kind": "bessel-debug", "order": order}
    write_table(os.path.join(out_dir, "bessel.csv"), meta, {
        "x": x,
        "bessel_j": bessel_j(order, x),
        "bessel_n": bessel_n(order, x),
        "wronskian_defect": wronskian_defect(order, x),
    })
    return 0


_HANDLERS = {
    "spectrum": cmd_spectrum,
    "floquet": cmd_floquet,
    "evolve": cmd_evolve,
    "fourier": cmd_fourier,
    "revival": cmd_revival,
    "bessel-debug": cmd_bessel_debug,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ringsoi",
        description="Spectra and dynamics of a Rashba-coupled annular ring.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--preset", help="packaged preset name (fig2a..fig7)")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--validate-output", action="store_true",
                       help="re-read and revalidate every written table")
        p.add_argument("overrides", nargs="*", metavar="key=value")
    return parser


def _assemble_config(args) -> Config:
    cfg = Config()
    if args.preset:
        cfg.merge(load_preset(args.preset))
    if args.config:
        if not os.path.isfile(args.config):
            raise ValidationError(f"config file not found: {args.config}")
        with open(args.config) as fh:
            cfg.merge(parse_config_text(fh.read(), source=args.config))
    for item in args.overrides:
        if "=" not in item:
            raise ValidationError(f"override must be key=value, got {item!r}")
        key, value = item.split("=", 1)
        cfg.merge({key.strip(): value.strip()})
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ValidationError(f"--threads must be >= 1, got {args.threads}")
        cfg = _assemble_config(args)
        os.makedirs(args.out, exist_ok=True)
        before = set(os.listdir(args.out))
        code = _HANDLERS[args.command](cfg, args.out, args.threads)
        if args.validate_output:
            for name in sorted(set(os.listdir(args.out)) - before | {
                    n for n in os.listdir(args.out) if n.endswith(".csv")}):
                if name.endswith(".csv"):
                    validate_table(os.path.join(args.out, name))
        return code
    except ValidationError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
