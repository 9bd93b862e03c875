"""gridscope command line: serve the API, fit models, export the archive."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import analytics as analytics_mod
from .config import load_config
from .store import JobStore


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridscope")
    parser.add_argument("--config", type=Path, default=None, help="YAML config file")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--port", type=int, default=None)
    serve.add_argument("--transport", choices=["ssh", "exec", "sim"], default=None)
    serve.add_argument("--db", type=Path, default=None)
    serve.add_argument("--host", default="127.0.0.1")

    analytics = sub.add_parser("analytics", help="job-history analytics")
    analytics_sub = analytics.add_subparsers(dest="analytics_command", required=True)
    fit = analytics_sub.add_parser("fit", help="fit per-tag resource models")
    fit.add_argument("--db", type=Path, default=None)
    fit.add_argument("--rules", type=Path, required=True, help="tag rule JSON file")
    fit.add_argument("--group", action="append", default=None, help="tag key to group by")
    fit.add_argument("--covariate", default=None, help="numeric tag key (default reads)")
    fit.add_argument("--out", type=Path, default=None, help="write model CSV here")
    fit.add_argument(
        "--scatter-dir", type=Path, default=None, help="also write scatter data files"
    )

    export = sub.add_parser("export", help="dump the Job table as CSV")
    export.add_argument("--db", type=Path, default=None)
    export.add_argument("--out", type=Path, default=None, help="default: stdout")

    keys = sub.add_parser("keys", help="manage encrypted SSH credentials")
    keys_sub = keys.add_subparsers(dest="keys_command", required=True)
    add = keys_sub.add_parser("add", help="encrypt and store a private key")
    add.add_argument("--key-file", type=Path, required=True)
    add.add_argument("--user", required=True)
    add.add_argument("--host", required=True)
    add.add_argument("--port", type=int, default=22)
    add.add_argument(
        "--passphrase-env",
        default="GRIDSCOPE_KEY_PASSPHRASE",
        help="env var holding the passphrase (avoids shell history)",
    )
    keys_sub.add_parser("list", help="list stored credentials")
    revoke = keys_sub.add_parser("revoke", help="revoke a fingerprint")
    revoke.add_argument("--fingerprint", required=True)

    return parser


def cmd_serve(args, config) -> int:
    import uvicorn

    from .app import PollerThread, build_application

    if args.port is not None:
        config.server.port = args.port
    if args.transport is not None:
        config.cluster.transport = args.transport
    if args.db is not None:
        config.server.db_path = str(args.db)

    application = build_application(config)
    api = application.create_api()
    poller_thread = PollerThread(application.poller, application.sim)
    poller_thread.start()
    try:
        uvicorn.run(api, host=args.host, port=config.server.port, log_level="info")
    finally:
        poller_thread.stop()
    return 0


def cmd_analytics_fit(args, config) -> int:
    db_path = args.db or config.server.db_path
    store = JobStore(db_path)
    rules = analytics_mod.load_rules(args.rules)
    grouping = args.group or config.analytics.group_keys
    covariate = args.covariate or config.analytics.covariate_key
    report = analytics_mod.build_models(store, rules, grouping, covariate)
    csv_text = analytics_mod.models_to_csv(report.models)
    if args.out:
        args.out.write_text(csv_text)
    else:
        sys.stdout.write(csv_text)
    for line in report.skipped:
        print(f"skipped: {line}", file=sys.stderr)
    if args.scatter_dir:
        args.scatter_dir.mkdir(parents=True, exist_ok=True)
        data = analytics_mod.scatter_data(store, rules, grouping, covariate)
        units = {
            analytics_mod.Metric.ElapsedSeconds: ("cpu_hours", "hours"),
            analytics_mod.Metric.MaxMemoryBytes: ("ram_gib", "GiB"),
        }
        for metric, rows in data.items():
            name, unit = units[metric]
            lines = [f"group,{covariate},{name}"]
            lines += [f"{group},{x!r},{y!r}" for group, x, y in rows]
            (args.scatter_dir / f"{name}.csv").write_text("\n".join(lines) + "\n")
    store.close()
    return 0


def cmd_keys(args, config) -> int:
    import getpass
    import os

    from .keystore import KeyStore

    keystore = KeyStore(
        config.server.keystore_path,
        revocation_path=config.server.revocation_path or None,
    )
    if args.keys_command == "add":
        passphrase = os.environ.get(args.passphrase_env) or getpass.getpass("key passphrase: ")
        key_id = keystore.store_key(
            args.key_file.read_bytes(), passphrase, args.user, args.host, args.port
        )
        credential = keystore.get_credential(key_id)
        print(f"stored key {key_id} for {args.user}@{args.host}:{args.port}")
        print(f"fingerprint {credential.fingerprint}")
        return 0
    if args.keys_command == "list":
        for cred in keystore.list_credentials():
            revoked = " (revoked)" if keystore.is_revoked(cred.fingerprint) else ""
            print(
                f"{cred.key_id}  {cred.user}@{cred.host}:{cred.port}  {cred.fingerprint}{revoked}"
            )
        return 0
    if args.keys_command == "revoke":
        revocation = keystore.revoke_key(args.fingerprint)
        print(f"revocation list now holds {len(revocation.revoked_fingerprints)} fingerprints")
        return 0
    raise AssertionError(f"unhandled keys command {args.keys_command}")


def cmd_export(args, config) -> int:
    db_path = args.db or config.server.db_path
    store = JobStore(db_path)
    text = store.export_csv_text()
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    store.close()
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    config = load_config(args.config)
    if args.command == "serve":
        return cmd_serve(args, config)
    if args.command == "analytics":
        return cmd_analytics_fit(args, config)
    if args.command == "export":
        return cmd_export(args, config)
    if args.command == "keys":
        return cmd_keys(args, config)
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
