"""Command-line runner: ``deig <suite> --config FILE [options]``.

Each suite writes one CSV into ``--out`` and prints a single summary line of
``key=value`` pairs.  Exit status is 0 on success, 2 for configuration
errors, 3 when a secular solve fails to converge and 1 for other failures.
"""

import argparse
import re
import sys
from pathlib import Path

import numpy as np

from deig.applications import covariance, doa, filters, spectrum
from deig.config import SUITES, parse_config
from deig.consensus import ConsensusConfig, Protocol, Shift, distinct_nonzero, fit_filter_coefficients
from deig.errors import DeigError, NonConvergence, ParseError, ValidationError
from deig.graph import Graph, benchmark10_graph, gen_d_regular, gen_small_world, subarray6_graph
from deig.linalg.oracle import dense_eig_oracle
from deig.netsim import rng_stream
from deig.tracker import gather_global, make_tracker, tracker_step

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3


def build_graph(cfg):
    topo, n = cfg["topology"], cfg["nodes"]
    if topo == "benchmark10":
        return benchmark10_graph()
    if topo == "subarray6":
        return subarray6_graph()
    if topo == "d-regular":
        return gen_d_regular(n, cfg["degree"], cfg["seed"])
    if topo == "small-world":
        return gen_small_world(n, cfg["degree"], cfg["rewire"], cfg["seed"])
    if topo == "path":
        return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def build_consensus(cfg, graph):
    """Consensus backend; ftAC and filter use the exact graph spectrum."""
    proto = Protocol.parse(cfg["protocol"])
    if proto in (Protocol.PS, Protocol.AC):
        return ConsensusConfig(proto, gamma_max=cfg["gamma"], epsilon=cfg["epsilon"])
    lap_eigs = np.linalg.eigvalsh(graph.laplacian())
    if proto is Protocol.FTAC:
        return ConsensusConfig(proto, distinct_eigenvalues=distinct_nonzero(lap_eigs))
    if proto is Protocol.FILTER:
        freqs = filters.distinct_frequencies(lap_eigs)
        order = cfg["filter_order"] if cfg["filter_order"] is not None else freqs.size - 1
        want = np.zeros(freqs.size)
        want[np.argmin(np.abs(freqs))] = 1.0
        return ConsensusConfig(proto, filter=fit_filter_coefficients(freqs, want, order, Shift.LAPLACIAN))
    return ConsensusConfig(proto)


def _write_csv(writer, out_dir, name, rows):
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{name}.csv"
    writer(path, rows)
    return path


def run_covariance_suite(cfg, graph, consensus, out_dir, workers):
    scenario = covariance.CovarianceScenario(mode=cfg["mode"], T=cfg["T"], alpha=cfg["alpha"] or 0.95,
                                             beta=cfg["beta"], complex_field=cfg["complex"], seed=cfg["seed"])
    net = make_tracker(graph, consensus, complex_field=cfg["complex"], xi=cfg["xi"])
    rep = covariance.run_covariance(scenario, net)
    rows = [{"t": t + 1, "k": k, "lambda_est": float(rep.lam_est[t, k]),
             "lambda_central": float(rep.lam_central[t, k]), "eta": float(rep.eta[t, k]),
             "eta_tilde": float(rep.eta_tilde[t, k])}
            for t in range(rep.lam_est.shape[0]) for k in range(rep.lam_est.shape[1])]
    _write_csv(_dict_writer(("t", "k", "lambda_est", "lambda_central", "eta", "eta_tilde")), out_dir,
               "covariance", rows)
    return {"eta1_final": rep.eta[-1, 0], "eta1_vs_central": rep.eta_vs_central[-1, 0],
            "node_disagreement": rep.disagreement[-1]}, net.metrics


def _doa_setup(cfg, graph):
    geometry = doa.random_geometry(graph.n_nodes, cfg["seed"], radius=cfg["radius"], delta=cfg["delta"])
    return geometry


def run_doa_suite(cfg, graph, consensus, out_dir, workers):
    geometry = _doa_setup(cfg, graph)
    scenario = doa.DoaScenario(sources=cfg["sources"], snr_db=cfg["snr_db"], T=cfg["T"], alpha=cfg["alpha"],
                               seed=cfg["seed"])
    res = doa.run_doa_estimate(scenario, geometry, graph, consensus, trials=cfg["trials"], workers=workers)
    _write_csv(_dict_writer(doa.DOA_COLUMNS), out_dir, "doa", res.rows)
    return {"rmse": res.rmse, "rmse_central": res.rmse_central, "failed_trials": res.failed_trials}, res.metrics


def run_doa_track_suite(cfg, graph, consensus, out_dir, workers):
    geometry = _doa_setup(cfg, graph)
    scenario = doa.DoaScenario(snr_db=cfg["snr_db"], T=cfg["T"], alpha=cfg["alpha"], seed=cfg["seed"],
                               trajectory=doa.crossing_tracks(cfg["T"], cfg["span"]))
    res = doa.run_doa_track(scenario, geometry, graph, consensus, burn_in=cfg["burn_in"])
    _write_csv(_dict_writer(doa.DOA_COLUMNS), out_dir, "doa-track", res.rows)
    return {"rmse": res.rmse, "rmse_central": res.rmse_central, "failed_steps": res.failed_trials}, res.metrics


def run_spectrum_suite(cfg, graph, consensus, out_dir, workers):
    if cfg["events"]:
        base = spectrum.random_event_scenario(graph, cfg["events"], cfg["seed"], learning=cfg["learning"])
        scenario = spectrum.SpectrumScenario(graph, learning=base.learning, events=base.events, seed=cfg["seed"])
    else:
        scenario = spectrum.SpectrumScenario(graph, learning=cfg["learning"], normalized=cfg["normalized"],
                                             seed=cfg["seed"])
    net = make_tracker(graph, consensus, xi=cfg["xi"])
    res = spectrum.run_spectrum(scenario, net)
    name = "spectrum-track" if cfg["suite"] == "spectrum-track" else "spectrum"
    _write_csv(spectrum.write_spectrum_csv, out_dir, name, res.rows())
    summary = {"lambda1_learned": res.lam_est[res.learning_steps - 1, 0],
               "lambda1_central": res.lam_true[res.learning_steps - 1, 0],
               "learning_steps": res.learning_steps, "eta1_final": res.eta[-1]}
    if len(res.eta) > res.learning_steps:
        summary["eta1_max_after_events"] = res.eta[res.learning_steps:].max()
    return summary, net.metrics


def run_filter_suite(cfg, graph, consensus, out_dir, workers):
    runs = filters.run_filter_design(graph, K=cfg["K"], seed=cfg["seed"], designs=cfg["designs"])
    _write_csv(filters.write_filter_csv, out_dir, "filter-design", filters.filter_rows(runs))
    summary = {}
    for name, run in runs.items():
        summary[f"{name}_final_error"] = run.final_error
        summary[f"{name}_peak"] = run.peak_magnitude
    return summary, None


def run_eig_bench_suite(cfg, graph, consensus, out_dir, workers):
    """Random rank-one stream through the tracker, scored against the Jacobi oracle."""
    n = graph.n_nodes
    rng = rng_stream(cfg["seed"], "eig-bench")
    net = make_tracker(graph, consensus, complex_field=cfg["complex"], xi=cfg["xi"])
    dense = np.zeros((n, n), dtype=complex if cfg["complex"] else float)
    rows, worst = [], 0.0
    for t in range(1, cfg["T"] + 1):
        x = rng.standard_normal(n)
        if cfg["complex"]:
            x = (x + 1j * rng.standard_normal(n)) / np.sqrt(2)
        tracker_step(net, x, rho=1.0)
        dense = dense + np.outer(x, x.conj())
        lam, u = gather_global(net)
        ref, _ = dense_eig_oracle(dense)
        err = float(np.abs(lam - ref).max())
        orth = float(np.abs(u.conj().T @ u - np.eye(n)).max())
        worst = max(worst, err)
        rows.append({"t": t, "max_eig_error": err, "orthogonality": orth})
    _write_csv(_dict_writer(("t", "max_eig_error", "orthogonality")), out_dir, "eig-bench", rows)
    return {"max_eig_error": worst, "orthogonality_final": rows[-1]["orthogonality"]}, net.metrics


def _dict_writer(columns):
    import csv

    def write(path, rows):
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)

    return write


SUITE_RUNNERS = {
    "covariance": run_covariance_suite,
    "doa": run_doa_suite,
    "doa-track": run_doa_track_suite,
    "spectrum": run_spectrum_suite,
    "spectrum-track": run_spectrum_suite,
    "filter-design": run_filter_suite,
    "eig-bench": run_eig_bench_suite,
}


def _format_value(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    return str(v)


def run(cfg, out_dir, workers=1):
    """Run the configured suite; returns the summary dict."""
    graph = build_graph(cfg)
    consensus = build_consensus(cfg, graph)
    summary, metrics = SUITE_RUNNERS[cfg.suite](cfg, graph, consensus, Path(out_dir), workers)
    result = {"suite": cfg.suite, "protocol": cfg["protocol"], "seed": cfg["seed"], **summary}
    if metrics is not None:
        result["consensus_rounds"] = metrics.consensus_rounds
        result["scalar_messages"] = metrics.scalar_messages
    return result


def make_parser():
    parser = argparse.ArgumentParser(prog="deig", description="Decentralized online eigendecomposition suites.")
    parser.add_argument("suite", choices=SUITES)
    parser.add_argument("--config", type=Path, help="key = value scenario file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", type=Path, default=Path("out"))
    parser.add_argument("--protocol", choices=[p.value for p in Protocol])
    parser.add_argument("--gamma", type=int)
    parser.add_argument("--trials-parallel", type=int, default=1, dest="workers")
    return parser


def load_config(args):
    text = args.config.read_text(encoding="utf-8") if args.config else ""
    has_suite = re.search(r"^\s*suite\s*=", text, re.MULTILINE)
    cfg_text = text if has_suite else f"suite = {args.suite}\n{text}"
    cfg = parse_config(cfg_text)
    if cfg.suite != args.suite:
        raise ValidationError(f"config is for {cfg.suite!r}, command asked for {args.suite!r}", key="suite")
    overrides = {k: v for k, v in (("seed", args.seed), ("protocol", args.protocol), ("gamma", args.gamma))
                 if v is not None}
    return cfg.replace(**overrides) if overrides else cfg


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except (ParseError, ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        summary = run(cfg, args.out, args.workers)
    except NonConvergence as exc:
        print(f"error: secular solve did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (DeigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    print(" ".join(f"{k}={_format_value(v)}" for k, v in summary.items()))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
