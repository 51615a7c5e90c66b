"""Command-line client and administrator toolbox.

``mf kiosk ...`` simulates a street collection point: reports queue into a
durable offline outbox and replay to the server idempotently. ``mf admin
...`` covers dataset generation, training, threshold calibration,
enrollment, serving and ad-hoc queries.

Exit codes: 0 success, 2 validation, 3 network, 4 auth, 5 corruption.
"""

from __future__ import annotations

import base64
import functools
import json
import sys
from pathlib import Path

import click

from .errors import (
    AuthFailure,
    BadImage,
    BadPage,
    CorruptLog,
    EmptyEvidence,
    EmptyQuery,
    KOutOfRange,
    MalformedHeader,
    MFError,
    OutboxFull,
    ServerUnreachable,
    TooFewChips,
    TooFewVariations,
    TruncatedPayload,
    UnbalancedQuote,
    UnsupportedFormat,
    ValidationError,
)

EXIT_VALIDATION = 2
EXIT_NETWORK = 3
EXIT_AUTH = 4
EXIT_CORRUPTION = 5

_VALIDATION_ERRORS = (
    ValidationError, EmptyEvidence, EmptyQuery, UnbalancedQuote, BadPage,
    BadImage, MalformedHeader, TruncatedPayload, UnsupportedFormat,
    TooFewVariations, TooFewChips, KOutOfRange, OutboxFull,
)


def _exit_code_for(err: MFError) -> int:
    if isinstance(err, _VALIDATION_ERRORS):
        return EXIT_VALIDATION
    if isinstance(err, ServerUnreachable):
        return EXIT_NETWORK
    if isinstance(err, AuthFailure):
        return EXIT_AUTH
    if isinstance(err, CorruptLog):
        return EXIT_CORRUPTION
    return 1


def mf_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except MFError as err:
            click.echo(f"error [{err.code}]: {err.message}", err=True)
            sys.exit(_exit_code_for(err))
    return wrapper


@click.group()
def main():
    """Missing-and-found service tools."""


# ---------------------------------------------------------------------------
# kiosk
# ---------------------------------------------------------------------------

@main.group()
def kiosk():
    """Offline collection-point commands."""


def _open_outbox(state_dir: str):
    from .outbox import Outbox
    path = Path(state_dir)
    path.mkdir(parents=True, exist_ok=True)
    return Outbox(path / "outbox.log")


@kiosk.command("queue-item")
@click.option("--state-dir", required=True, help="Kiosk state directory (outbox lives here).")
@click.option("--kind", type=click.Choice(["FOUND", "LOST"]), required=True)
@click.option("--category", default="other",
              type=click.Choice(["watch", "phone", "bag", "document", "jewelry", "other"]))
@click.option("--description", default="")
@click.option("--location", default="")
@click.option("--photo", type=click.Path(exists=True, dir_okay=False), default=None)
@mf_errors
def queue_item(state_dir, kind, category, description, location, photo):
    """Queue a found/lost item report for the next sync."""
    payload = {
        "type": "item",
        "kind": kind,
        "category": category,
        "description": description,
        "location": location,
    }
    if photo:
        payload["photo_b64"] = base64.b64encode(Path(photo).read_bytes()).decode("ascii")
    with _open_outbox(state_dir) as outbox:
        seq = outbox.queue_report(payload)
    click.echo(f"queued seq {seq}")


@kiosk.command("queue-person")
@click.option("--state-dir", required=True)
@click.option("--kind", type=click.Choice(["MISSING", "FOUND_ALIVE", "DECEASED"]), required=True)
@click.option("--photo", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--location", default="")
@click.option("--subject-person-id", default=None,
              help="Enrolled person a MISSING report refers to.")
@mf_errors
def queue_person(state_dir, kind, photo, location, subject_person_id):
    """Queue a missing/found/deceased person report for the next sync."""
    payload = {
        "type": "person",
        "kind": kind,
        "location": location,
        "photo_b64": base64.b64encode(Path(photo).read_bytes()).decode("ascii"),
    }
    if subject_person_id:
        payload["subject_person_id"] = subject_person_id
    with _open_outbox(state_dir) as outbox:
        seq = outbox.queue_report(payload)
    click.echo(f"queued seq {seq}")


@kiosk.command("sync")
@click.option("--state-dir", required=True)
@click.option("--server", required=True, help="Server base URL, e.g. http://127.0.0.1:8700")
@click.option("--token", required=True)
@click.option("--kiosk-id", required=True)
@mf_errors
def kiosk_sync(state_dir, server, token, kiosk_id):
    """Replay unsent reports to the server (safe to interrupt and rerun)."""
    from .outbox import sync_replay
    with _open_outbox(state_dir) as outbox:
        summary = sync_replay(outbox, server, token, kiosk_id)
    click.echo(
        f"sent {summary.sent}, duplicates {summary.duplicates}, "
        f"server high water {summary.high_water}"
    )


# ---------------------------------------------------------------------------
# admin
# ---------------------------------------------------------------------------

@main.group()
def admin():
    """Server-side administration."""


@admin.command("gen-dataset")
@click.option("--identities", type=int, required=True)
@click.option("--variations", type=int, required=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@mf_errors
def gen_dataset(identities, variations, seed, out_dir):
    """Render a synthetic identity corpus to PGM files."""
    from .dataset import write_dataset
    manifest = write_dataset(out_dir, identities, variations, seed)
    click.echo(
        f"wrote {len(manifest['identities'])} identities x "
        f"{manifest['variations']} variations under {out_dir}"
    )


@admin.command("train")
@click.option("--data", "data_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--k", type=int, default=32, show_default=True)
@click.option("--out", "out_file", type=click.Path(dir_okay=False), required=True)
@click.option("--holdout", type=int, default=0, show_default=True,
              help="Exclude the last N variations per identity from training.")
@click.option("--version", type=int, default=1, show_default=True)
@mf_errors
def train(data_dir, k, out_file, holdout, version):
    """Fit the eigenmodel on a dataset and save it."""
    from .calibrate import split_dataset, train_from_images
    from .dataset import load_dataset
    from .recognition import save_model_file
    gallery_images, _ = split_dataset(load_dataset(data_dir), holdout=holdout)
    model = train_from_images(gallery_images, k=k, version=version)
    save_model_file(model, out_file)
    click.echo(f"trained k={model.k} (requested {k}) on "
               f"{sum(len(v) for v in gallery_images.values())} chips -> {out_file}")


@admin.command("calibrate-threshold")
@click.option("--data", "data_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--k", type=int, default=32, show_default=True)
@click.option("--holdout", type=int, default=1, show_default=True)
@click.option("--model", "model_file", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Reuse a trained model instead of fitting one.")
@click.option("--report-dir", type=click.Path(file_okay=False), default=None,
              help="Write distances.csv and a histogram figure here.")
@mf_errors
def calibrate_threshold_cmd(data_dir, k, holdout, model_file, report_dir):
    """Calibrate the decision threshold on held-out variations."""
    from .calibrate import (
        build_gallery,
        calibrate_threshold,
        split_dataset,
        train_from_images,
        write_calibration_report,
    )
    from .dataset import load_dataset
    from .recognition import load_model_file
    gallery_images, probe_images = split_dataset(load_dataset(data_dir), holdout=holdout)
    if model_file:
        model = load_model_file(model_file)
    else:
        model = train_from_images(gallery_images, k=k)
    gallery = build_gallery(model, gallery_images)
    result = calibrate_threshold(model, gallery, probe_images)
    click.echo(f"genuine median   {result.genuine_median:.4f}")
    click.echo(f"impostor median  {result.impostor_median:.4f}")
    click.echo(f"threshold        {result.theta:.4f}")
    if report_dir:
        paths = write_calibration_report(result, report_dir)
        click.echo(f"report: {paths['csv']} and {paths['figure']}")


@admin.command("serve")
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--console-dir", type=click.Path(file_okay=False), default=None,
              help="Serve a built operator console from this directory at /console.")
@mf_errors
def serve(config_file, console_dir):
    """Run the HTTP service (MF_LISTEN etc. override the config file)."""
    import uvicorn
    from .config import load_config
    from .service import MFService, create_app
    config = load_config(config_file)
    service = MFService(config)
    app = create_app(service)
    if console_dir:
        from fastapi.staticfiles import StaticFiles
        app.mount("/console", StaticFiles(directory=console_dir, html=True), name="console")
    click.echo(f"listening on {config.listen}, data in {config.data_dir}")
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")


def _request(method: str, url: str, token: str, **kwargs):
    import requests
    try:
        resp = requests.request(
            method, url, headers={"Authorization": f"Bearer {token}"}, timeout=30, **kwargs
        )
    except (requests.ConnectionError, requests.Timeout) as err:
        raise ServerUnreachable(str(err)) from err
    if resp.status_code in (401, 403):
        raise AuthFailure(resp.json().get("message", f"HTTP {resp.status_code}"))
    if resp.status_code >= 400:
        try:
            body = resp.json()
        except ValueError:
            body = {"message": resp.text}
        raise ValidationError(f"HTTP {resp.status_code}: {body.get('message', body)}")
    return resp.json()


@admin.command("enroll")
@click.option("--server", required=True)
@click.option("--token", required=True)
@click.option("--name", "full_name", required=True)
@click.option("--nationality", default="")
@click.option("--group", "group_id", default=None)
@click.argument("photos", nargs=-1, type=click.Path(exists=True, dir_okay=False))
@mf_errors
def enroll_cmd(server, token, full_name, nationality, group_id, photos):
    """Enroll a person from >= 3 photos via the service API."""
    if len(photos) < 3:
        raise ValidationError(f"enrollment needs >= 3 photos, got {len(photos)}")
    files = [
        ("photos", (Path(p).name, Path(p).read_bytes(), "application/octet-stream"))
        for p in photos
    ]
    data = {"full_name": full_name, "nationality": nationality}
    if group_id:
        data["group_id"] = group_id
    body = _request("POST", f"{server.rstrip('/')}/api/v1/persons", token,
                    data=data, files=files)
    click.echo(f"enrolled {body['person_id']} ({body['full_name']})")


@admin.command("query-photo")
@click.option("--server", required=True)
@click.option("--token", required=True)
@click.option("--top-n", type=int, default=None)
@click.option("--threshold", type=float, default=None)
@click.argument("photo", type=click.Path(exists=True, dir_okay=False))
@mf_errors
def query_photo(server, token, top_n, threshold, photo):
    """Identify the face in a photo against the enrolled gallery."""
    data = {}
    if top_n is not None:
        data["top_n"] = str(top_n)
    if threshold is not None:
        data["threshold"] = str(threshold)
    body = _request(
        "POST", f"{server.rstrip('/')}/api/v1/identify", token,
        data=data,
        files={"photo": (Path(photo).name, Path(photo).read_bytes(), "application/octet-stream")},
    )
    if not body["matches"]:
        click.echo("no identity claimed (no match within threshold)")
    for m in body["matches"]:
        click.echo(f"#{m['rank']}  {m['person_id']}  dist={m['distance']:.4f}  "
                   f"{m.get('full_name') or ''}")
    click.echo(f"[model v{body['model_version']}, {body['elapsed_ms']:.0f} ms]")


@admin.command("search")
@click.option("--server", required=True)
@click.option("--token", required=True)
@click.option("--limit", type=int, default=20, show_default=True)
@click.argument("query")
@mf_errors
def search_cmd(server, token, limit, query):
    """Run a query (grammar: terms, "phrases", field:value filters)."""
    body = _request("GET", f"{server.rstrip('/')}/api/v1/reports", token,
                    params={"query": query, "limit": limit})
    for hit in body["results"]:
        r = hit["report"]
        line = f"{r['report_id'][:8]}  {r['kind']:<12} {r['status']:<14} {r['location']}"
        if "description" in r:
            line += f"  {r['description'][:50]}"
        click.echo(line)
    click.echo(f"{body['total']} result(s)")


if __name__ == "__main__":
    main()
