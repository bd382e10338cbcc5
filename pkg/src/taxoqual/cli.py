"""Command-line entry point.

Usage::

    taxoqual --config run.yaml validate
    taxoqual --config run.yaml evaluate NAICS
    taxoqual --config run.yaml --format json compare
    taxoqual --config run.yaml robustness-detail Omniclass -k 5
    taxoqual --config run.yaml evidence NAICS records.csv --cohen r1 r2 --dimension NAICS

Exit codes: 0 success, 1 configuration or usage error, 2 parse error,
3 taxonomy invariant violation, 4 evaluation error.
"""

from __future__ import annotations

import sys
from functools import partial

import click

from .config import ConfigError, load_config
from .evidence import RecordsError, cohen_kappa, fleiss_kappa, intra_rater, load_records
from .ingest import IngestError
from .metrics import MetricError
from .model import InvalidTaxonomyError
from .report import (
    compare,
    compare_csv,
    evaluate,
    evaluation_csv,
    evidence_summary,
    load_backend,
    load_taxonomy,
    render_compare_text,
    render_csv,
    render_detail_text,
    render_evaluation_text,
    render_table,
    to_json,
)
from .similarity import EmbeddingError

EXIT_OK, EXIT_CONFIG, EXIT_PARSE, EXIT_INVARIANT, EXIT_EVAL = 0, 1, 2, 3, 4


class Failure(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


def _emit(text: str) -> None:
    click.echo(text, nl=False)


def _config(ctx):
    path = ctx.obj["config_path"]
    if path is None:
        raise Failure(EXIT_CONFIG, "--config is required")
    try:
        return load_config(path)
    except ConfigError as exc:
        raise Failure(EXIT_CONFIG, str(exc))


def _load(ctx, cfg, name):
    try:
        return load_taxonomy(cfg.taxonomy(name), strict=ctx.obj["strict"] or cfg.strict)
    except ConfigError as exc:
        raise Failure(EXIT_CONFIG, str(exc))
    except IngestError as exc:
        raise Failure(EXIT_PARSE, f"{name}: {exc}")
    except InvalidTaxonomyError as exc:
        raise Failure(EXIT_INVARIANT, f"{name}: " + "; ".join(p.message for p in exc.problems))


def _backend(ctx, cfg):
    try:
        return load_backend(cfg, ctx.obj["backend"])
    except ConfigError as exc:
        raise Failure(EXIT_CONFIG, str(exc))
    except EmbeddingError as exc:
        raise Failure(EXIT_PARSE, f"similarity file: {exc}")


@click.group()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="Run configuration (YAML).")
@click.option("--format", "fmt", type=click.Choice(["text", "json", "csv"]), default="text", show_default=True)
@click.option("--strict", is_flag=True, help="Treat ingest warnings as errors.")
@click.option("--backend", type=click.Choice(["trigram", "word-vectors", "lookup"]), default=None,
              help="Override the configured similarity backend.")
@click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True)
@click.pass_context
def cli(ctx, config_path, fmt, strict, backend, threads):
    """Measure and compare the quality of hierarchical taxonomies."""
    ctx.obj = {"config_path": config_path, "fmt": fmt, "strict": strict, "backend": backend, "threads": threads}


@cli.command()
@click.pass_context
def validate(ctx):
    """Parse every configured taxonomy and report defects."""
    cfg = _config(ctx)
    strict = ctx.obj["strict"] or cfg.strict
    results, worst = [], EXIT_OK
    for tc in cfg.taxonomies:
        entry = {"name": tc.name, "status": "ok", "warnings": [], "repaired": [], "problems": []}
        try:
            lt = load_taxonomy(tc, strict=strict)
        except IngestError as exc:
            entry.update(status="parse_error", problems=[{"kind": "parse", "codes": [], "message": str(exc)}])
            worst = EXIT_PARSE if worst in (EXIT_OK, EXIT_INVARIANT) else worst
        except InvalidTaxonomyError as exc:
            entry.update(status="invalid", problems=[
                {"kind": p.kind, "codes": list(p.codes), "message": p.message} for p in exc.problems
            ])
            worst = worst or EXIT_INVARIANT
        except ConfigError as exc:
            raise Failure(EXIT_CONFIG, str(exc))
        else:
            entry.update(lt.report.to_dict())
            entry["nodes"] = len(lt.taxonomy)
        results.append(entry)

    fmt = ctx.obj["fmt"]
    if fmt == "json":
        _emit(to_json({"taxonomies": results, "strict": strict}))
    else:
        rows = []
        for e in results:
            for w in e["warnings"]:
                rows.append([e["name"], "warning", str(w["row"]), w["code"], w["message"]])
            for r in e["repaired"]:
                rows.append([e["name"], "repaired", str(r["row"]), r["original_code"], f"normalized to {r['repaired_code']!r}"])
            for p in e["problems"]:
                rows.append([e["name"], p["kind"], "", " ".join(p["codes"]), p["message"]])
        if fmt == "csv":
            _emit(render_csv(["taxonomy", "kind", "row", "code", "message"], rows))
        else:
            for e in results:
                extra = f", {e['nodes']} nodes" if "nodes" in e else ""
                click.echo(f"{e['name']}: {e['status']}{extra}")
            if rows:
                _emit("\n" + render_table(["Taxonomy", "Kind", "Row", "Code", "Message"], rows))
    ctx.exit(worst)


@cli.command("evaluate")
@click.argument("taxonomy_name")
@click.option("-k", "k", type=click.IntRange(min=1), default=5, show_default=True, help="Groups in top/bottom tables.")
@click.pass_context
def evaluate_cmd(ctx, taxonomy_name, k):
    """Compute every internal measurement for one taxonomy."""
    cfg = _config(ctx)
    lt = _load(ctx, cfg, taxonomy_name)
    ev = evaluate(lt, cfg, _backend(ctx, cfg), k=k, threads=ctx.obj["threads"])
    ev["config_digest"] = cfg.digest
    fmt = ctx.obj["fmt"]
    if fmt == "json":
        _emit(to_json(ev))
    elif fmt == "csv":
        _emit(evaluation_csv(ev))
    else:
        _emit(render_evaluation_text(ev))


@cli.command("compare")
@click.pass_context
def compare_cmd(ctx):
    """Side-by-side comparison of all configured taxonomies."""
    cfg = _config(ctx)
    if len(cfg.taxonomies) < 2:
        raise Failure(EXIT_CONFIG, "compare needs at least two taxonomies in the configuration")
    loaded = [_load(ctx, cfg, t.name) for t in cfg.taxonomies]
    backend = _backend(ctx, cfg)
    try:
        doc = compare(loaded, cfg, backend, threads=ctx.obj["threads"])
    except RecordsError as exc:
        raise Failure(EXIT_PARSE, f"records: {exc}")
    except (ConfigError, ValueError) as exc:
        raise Failure(EXIT_CONFIG, str(exc))
    fmt = ctx.obj["fmt"]
    if fmt == "json":
        _emit(to_json(doc))
    elif fmt == "csv":
        _emit(compare_csv(doc))
    else:
        _emit(render_compare_text(doc))


@cli.command("robustness-detail")
@click.argument("taxonomy_name")
@click.option("-k", "k", type=click.IntRange(min=1), default=5, show_default=True)
@click.pass_context
def robustness_detail_cmd(ctx, taxonomy_name, k):
    """Top/bottom leaf groups and per-dimension bottom-third shares."""
    cfg = _config(ctx)
    lt = _load(ctx, cfg, taxonomy_name)
    ev = evaluate(lt, cfg, _backend(ctx, cfg), k=k, threads=ctx.obj["threads"])
    if not ev["robustness"].get("applicable"):
        raise Failure(EXIT_EVAL, f"{taxonomy_name}: robustness not applicable: {ev['robustness']['reason']}")
    fmt = ctx.obj["fmt"]
    if fmt == "json":
        _emit(to_json({
            "taxonomy": taxonomy_name,
            "robustness_detail": ev["robustness_detail"],
            "dimension_summary": ev["dimension_summary"],
            "config_digest": cfg.digest,
        }))
    elif fmt == "csv":
        det = ev["robustness_detail"]
        rows = [["top", g["parent_code"], g["n_gc"], g["n_ic"], repr(g["outside_proportion"])] for g in det["top"]]
        rows += [["bottom", g["parent_code"], g["n_gc"], g["n_ic"], repr(g["outside_proportion"])] for g in det["bottom"]]
        _emit(render_csv(["table", "group", "n_nodes", "n_outside_nodes", "outside_proportion"], rows))
        _emit("\n" + render_csv(["dimension", "count", "bottom_third_count", "percentage"],
                                [[r["dimension"], r["group_count"], r["bottom_third_count"], r["percentage"]]
                                 for r in ev["dimension_summary"]]))
    else:
        _emit(render_detail_text(ev))


@cli.command("evidence")
@click.argument("taxonomy_name")
@click.argument("records_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--dimension", default=None, help="Dimension for agreement statistics (default: the only one).")
@click.option("--cohen", nargs=2, multiple=True, metavar="RATER_A RATER_B", help="Cohen's kappa between two raters.")
@click.option("--intra", nargs=3, multiple=True, metavar="RATER SESSION_A SESSION_B", help="Intra-rater kappa.")
@click.option("--fleiss", is_flag=True, help="Fleiss' kappa over all raters.")
@click.pass_context
def evidence_cmd(ctx, taxonomy_name, records_path, dimension, cohen, intra, fleiss):
    """Counts and agreement statistics from classification records."""
    cfg = _config(ctx)
    lt = _load(ctx, cfg, taxonomy_name)
    tax = lt.taxonomy
    try:
        with open(records_path, encoding="utf-8") as fh:
            records = load_records(fh, tax)
    except UnicodeDecodeError:
        raise Failure(EXIT_PARSE, f"{records_path}: not valid UTF-8")
    except RecordsError as exc:
        raise Failure(EXIT_PARSE, "invalid records:\n" + "\n".join(f"  line {ln}: {m}" for ln, m in exc.rows))

    requests = []
    if cohen or intra or fleiss:
        if dimension is None:
            if len(tax.dimensions) != 1:
                raise Failure(EXIT_CONFIG, "--dimension is required for multi-dimension taxonomies")
            dimension = tax.dimensions[0].id
        for a, b in cohen:
            requests.append((partial(cohen_kappa, rater_a=a, rater_b=b, dimension=dimension), f"cohen:{a}:{b}"))
        for r, s1, s2 in intra:
            requests.append((partial(intra_rater, rater=r, session_a=s1, session_b=s2, dimension=dimension),
                             f"intra:{r}:{s1}:{s2}"))
        if fleiss:
            requests.append((partial(fleiss_kappa, dimension=dimension), f"fleiss:{dimension}"))
    doc = evidence_summary(tax, records, requests)
    failed = [s for s in doc["agreement"] if "error" in s and requests]
    fmt = ctx.obj["fmt"]
    if fmt == "json":
        _emit(to_json(doc))
    else:
        rows = [
            ["records", str(doc["n_records"])],
            ["objects", str(doc["n_objects"])],
            ["unclassified objects", str(doc["unclassified"])],
            ["misclassified records", str(doc["misclassified"])],
            ["unused categories", str(doc["unused_categories"])],
            ["unused characteristics", str(doc["unused_characteristics"])],
            ["ambiguous classifications", str(len(doc["ambiguous"]))],
        ]
        for s in doc["agreement"]:
            rows.append([s["request"], f"{s['value']:.4f}" if "value" in s else f"n/a ({s['error']})"])
        if fmt == "csv":
            _emit(render_csv(["measurement", "value"], rows))
        else:
            _emit(render_table(["Measurement", "Value"], rows, f"Evidence for {tax.name}"))
            for w in doc["warnings"]:
                click.echo(f"warning: {w}", err=True)
    if failed:
        for s in failed:
            click.echo(f"error: {s['request']}: {s['error']}", err=True)
        ctx.exit(EXIT_EVAL)


def main(argv=None) -> int:
    try:
        rv = cli.main(args=argv, prog_name="taxoqual", standalone_mode=False)
    except Failure as exc:
        click.echo(f"error: {exc}", err=True)
        return exc.code
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return EXIT_CONFIG
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_CONFIG
    except MetricError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_EVAL
    return rv if isinstance(rv, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
