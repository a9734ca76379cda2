"""Operator command line: waveform plots, protocol runs, log analysis, and
the console backend.

Every flag can also come from a WRISTIM_* environment variable (e.g.
``WRISTIM_SEED`` for ``--seed``).  All subcommands are deterministic under
``--seed``.
"""

from __future__ import annotations

import json
import signal
import sys
from pathlib import Path

import click

from . import analysis as an
from . import effects as fx
from . import handmap as hm
from . import records as rec
from . import sessions as ss
from . import svgplot
from . import waveform as wf
from .perceiver import PerceiverConfig


@click.group()
def main():
    """Wrist electro-tactile haptics bench."""


def _outdir(out: str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


@main.command("waveform")
@click.option("--amp", type=float, required=True, help="stimulation amplitude, mA")
@click.option("--width", type=float, default=5.0, show_default=True,
              help="stimulation pulse width, ms")
@click.option("--rate", type=int, default=10_000, show_default=True,
              help="sample rate, Hz")
@click.option("--monophasic", is_flag=True,
              help="plain cathodic rectangle instead of the balanced stimulus")
@click.option("--out", type=click.Path(), default=".", show_default=True,
              envvar="WRISTIM_OUT")
def cmd_waveform(amp, width, rate, monophasic, out):
    """Render a stimulus to CSV and SVG."""
    outdir = _outdir(out)
    try:
        if monophasic:
            w = wf.synth_monophasic(amp, width, rate)
            title = f"monophasic {amp} mA / {width} ms"
        else:
            spec = wf.PulseSpec(amp, stim_width_ms=width,
                                priming_width_ms=8.0 * width)
            w = wf.synth_stimulus(spec, rate)
            title = (f"charge-balanced {amp} mA / {width} ms "
                     f"(priming {spec.priming_amplitude_ma:g} mA)")
    except (wf.AmplitudeRangeError, wf.SampleRateError,
            wf.UnbalancedSpecError) as e:
        raise click.ClickException(str(e))
    csv_path = outdir / "waveform.csv"
    svg_path = outdir / "waveform.svg"
    wf.write_waveform_csv(w, csv_path)
    svgplot.waveform_svg(w, svg_path, title)
    click.echo(f"wrote {csv_path} and {svg_path} "
               f"(net charge {wf.net_charge_uc(w):g} uC)")


@main.command("run")
@click.argument("kind", type=click.Choice(["study1", "study2"]))
@click.option("--seed", type=int, required=True, envvar="WRISTIM_SEED")
@click.option("--participants", type=int, default=1, show_default=True,
              envvar="WRISTIM_PARTICIPANTS")
@click.option("--policy", type=click.Choice([ss.POLICY_ELECTRO, ss.POLICY_VIBRO]),
              default=ss.POLICY_ELECTRO, show_default=True,
              envvar="WRISTIM_POLICY")
@click.option("--perceiver", "perceiver_path", type=click.Path(exists=True),
              default=None, help="perceiver config JSON",
              envvar="WRISTIM_PERCEIVER")
@click.option("--out", type=click.Path(), default=".", show_default=True,
              envvar="WRISTIM_OUT")
def cmd_run(kind, seed, participants, policy, perceiver_path, out):
    """Run a study protocol and write the trial log."""
    outdir = _outdir(out)
    base = PerceiverConfig.load(perceiver_path) if perceiver_path else None
    config = {
        "kind": kind,
        "seed": seed,
        "participants": participants,
        "policy": policy,
        "perceiver": perceiver_path or "default",
    }
    log_path = outdir / f"{kind}.jsonl"
    try:
        records = ss.run_cohort(kind, seed, participants, policy, base)
    except ss.SessionAborted as e:
        rec.write_log(log_path, e.records, config, complete=False)
        raise click.ClickException(
            f"session aborted ({e}); partial log at {log_path}")
    rec.write_log(log_path, records, config)
    click.echo(f"wrote {len(records)} trials to {log_path}")


@main.command("replay")
@click.argument("poses", type=click.Path(exists=True))
@click.option("--policy", type=click.Choice([ss.POLICY_ELECTRO, ss.POLICY_VIBRO]),
              default=ss.POLICY_ELECTRO, show_default=True,
              envvar="WRISTIM_POLICY")
@click.option("--visual-size",
              type=click.Choice(list(fx.SIZES)), default=fx.SIZE_FINGER,
              show_default=True, envvar="WRISTIM_VISUAL_SIZE")
@click.option("--opacity", type=click.Choice(list(fx.OPACITIES)),
              default=fx.OPACITY_FULL, show_default=True,
              envvar="WRISTIM_OPACITY")
@click.option("--seed", type=int, default=0, show_default=True,
              envvar="WRISTIM_SEED")
@click.option("--perceiver", "perceiver_path", type=click.Path(exists=True),
              default=None, envvar="WRISTIM_PERCEIVER")
@click.option("--out", type=click.Path(), default=".", show_default=True,
              envvar="WRISTIM_OUT")
def cmd_replay(poses, policy, visual_size, opacity, seed, perceiver_path, out):
    """Replay a hand-pose stream through the interaction renderer.

    Detected contact/release/detent events emit paired stimulus and visual
    commands; the audit trail (trigger/stim/visual times per pair) is written
    as line-delimited records."""
    from . import contact as ct
    from .perceiver import Perceiver, participant_variant
    from .simband import SimulatedWristband

    outdir = _outdir(out)
    stream = ct.load_pose_stream(poses)
    if not stream:
        raise click.ClickException(f"no poses in {poses}")
    base = PerceiverConfig.load(perceiver_path) if perceiver_path else PerceiverConfig()
    device = SimulatedWristband(
        perceiver=Perceiver(participant_variant(base, seed)), seed=seed)
    calibrations = {}
    if policy == ss.POLICY_ELECTRO:
        for finger in fx.FINGERS:
            calibrations[finger] = ss.run_calibration(
                device, finger, seed=rec.derive_seed(seed, "replay", finger))
    elements = [
        ct.UIElement("button", ct.KIND_BUTTON, (0.0, 0.0, 0.0),
                     (25.0, 25.0, 25.0)),
        ct.UIElement("cube", ct.KIND_GRABBABLE, (120.0, 0.0, 0.0),
                     (30.0, 30.0, 30.0)),
    ]
    session = ss.InteractionSession(device, elements, calibrations,
                                    policy=policy, visual_size=visual_size,
                                    visual_opacity=opacity)
    for pose in stream:
        session.feed(pose)
    audit = session.finish()
    audit_path = outdir / "interaction_audit.jsonl"
    with open(audit_path, "w") as f:
        for entry in audit:
            f.write(json.dumps(entry, sort_keys=True) + "\n")
    click.echo(f"replayed {len(stream)} poses, {len(audit)} feedback pairs "
               f"-> {audit_path}")


def _load_records(paths):
    all_records = []
    for path in paths:
        try:
            _, records, _ = rec.read_log(path)
        except rec.LogSchemaError as e:
            raise click.ClickException(f"{path}: {e}")
        all_records += records
    if not all_records:
        raise click.ClickException("no trial records in the given logs")
    return all_records


@main.command("analyze")
@click.argument("logs", nargs=-1, required=True,
                type=click.Path(exists=True))
@click.option("--welch", is_flag=True,
              help="Welch t statistics instead of pooled variance")
@click.option("--out", type=click.Path(), default=".", show_default=True,
              envvar="WRISTIM_OUT")
def cmd_analyze(logs, welch, out):
    """Rates, heatmaps and statistics from trial logs."""
    outdir = _outdir(out)
    records = _load_records(logs)
    handmap = hm.default_handmap()

    rows = an.rate_table(records, handmap)
    with open(outdir / "rates.csv", "w") as f:
        f.write("finger,condition,mean_pct,sd_pct,n\n")
        for r in rows:
            f.write(f"{r.finger},{r.condition},{r.mean:.6g},{r.sd:.6g},{r.n}\n")

    ttests = an.ttests_vs_baseline(records, handmap, pooled=not welch)
    if ttests:
        with open(outdir / "ttests.csv", "w") as f:
            f.write("finger,condition,t,df,p\n")
            for row in ttests:
                f.write(f"{row.finger},{row.condition},{row.result.t:.6g},"
                        f"{row.result.df:.6g},{row.result.p:.6g}\n")

    for finger in fx.FINGERS:
        participants, cube = an.rate_cube(records, finger, handmap)
        if len(participants) >= 2 and not (cube != cube).any():  # no NaN
            from .stats import rm_anova_2way
            result = rm_anova_2way(cube)
            payload = {
                "finger": finger,
                "participants": participants,
                "factor_a": list(fx.SIZES),
                "factor_b": list(fx.OPACITIES),
                "effects": {
                    name: {
                        "ss": e.ss, "df": e.df, "error_ss": e.error_ss,
                        "error_df": e.error_df, "F": e.f, "p": e.p,
                        "partial_eta_sq": e.partial_eta_sq,
                    } for name, e in result.effects.items()
                },
                "mauchly": {
                    name: {"W": m.w, "chi2": m.chi2, "df": m.df, "p": m.p,
                           "gg_epsilon": m.gg_epsilon}
                    for name, m in result.mauchly.items()
                },
                "posthoc_bonferroni": {
                    name: [{"levels": [p.level_a, p.level_b], "t": p.t,
                            "df": p.df, "p_raw": p.p_raw,
                            "p_adjusted": p.p_bonferroni}
                           for p in pairs]
                    for name, pairs in result.posthoc.items()
                },
            }
            with open(outdir / f"anova_{finger}.json", "w") as f:
                json.dump(payload, f, indent=2, sort_keys=True)
                f.write("\n")

    wrote_maps = []
    for finger in fx.FINGERS:
        channel = ss.DEFAULT_CHANNEL[finger]
        base_reports = [r.report for r in records
                        if r.study == "study1" and r.channel == channel
                        and r.report is not None]
        cond_reports = an.reports_for(records, finger=finger,
                                      size=fx.SIZE_FINGER,
                                      opacity=fx.OPACITY_FULL, study="study2")
        for label, reports in (("none", base_reports),
                               ("finger_full", cond_reports)):
            if reports:
                heat = an.aggregate_heatmap(reports)
                stem = outdir / f"heatmap_{finger}_{label}"
                an.write_heatmap_csv(heat, f"{stem}.csv")
                svgplot.heatmap_svg(heat, handmap, f"{stem}.svg",
                                    title=f"{finger}: {label}")
                wrote_maps.append(stem.name)

    click.echo(f"analyzed {len(records)} trials -> {outdir} "
               f"(rates.csv, {len(ttests)} t-tests, heatmaps: {len(wrote_maps)})")


@main.command("serve")
@click.option("--port", type=int, default=7801, show_default=True,
              envvar="WRISTIM_PORT")
@click.option("--seed", type=int, default=0, show_default=True,
              envvar="WRISTIM_SEED")
@click.option("--perceiver", "perceiver_path", type=click.Path(exists=True),
              default=None, envvar="WRISTIM_PERCEIVER")
@click.option("--out", type=click.Path(), default=".", show_default=True,
              envvar="WRISTIM_OUT")
@click.option("--debug-hooks", is_flag=True,
              help="enable fault-injection verbs (testing)")
def cmd_serve(port, seed, perceiver_path, out, debug_hooks):
    """Serve the operator-console backend on localhost."""
    from .console import ConsoleBackend, LineServer

    base = PerceiverConfig.load(perceiver_path) if perceiver_path else None
    backend = ConsoleBackend(seed=seed, base_config=base,
                             out_dir=_outdir(out), debug_hooks=debug_hooks)
    try:
        server = LineServer("127.0.0.1", port, backend)
    except OSError as e:
        raise click.ClickException(f"cannot bind port {port}: {e}")

    def handle_signal(signum, frame):
        server.stop()

    signal.signal(signal.SIGINT, handle_signal)
    signal.signal(signal.SIGTERM, handle_signal)
    click.echo(f"console backend on 127.0.0.1:{server.port}", err=True)
    server.serve_forever()
    click.echo("backend stopped", err=True)


if __name__ == "__main__":
    sys.exit(main())
