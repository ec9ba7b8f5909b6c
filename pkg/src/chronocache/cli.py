"""Command-line entry points: ``chronocache <subcommand> ...``."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import secrets
import signal
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import crypto_core, net, sim
from .cache_server import CacheServer
from .client import Client, KeyRing, ring_from_provider
from .errors import (ChronoCacheError, NoEntryError, NotFoundError, RevokedError,
                     StalePeriodError, UpstreamError, ValidationError)
from .provider import Provider
from .time_tree import TreeParams, eligible_node

log = logging.getLogger("chronocache")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VALIDATION = 2
EXIT_REVOKED = 3
EXIT_NOT_FOUND = 4
EXIT_UPSTREAM = 5


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ValidationError):
        return EXIT_VALIDATION
    if isinstance(exc, RevokedError):
        return EXIT_REVOKED
    if isinstance(exc, (NotFoundError, NoEntryError, StalePeriodError)):
        return EXIT_NOT_FOUND
    if isinstance(exc, UpstreamError):
        return EXIT_UPSTREAM
    return EXIT_ERROR


def _entropy(seed: Optional[int]):
    return crypto_core.seeded_entropy(seed) if seed is not None else secrets.token_bytes


def mac_key_path(key_file: str) -> Path:
    p = Path(key_file)
    return p.with_name(p.stem + ".mac.json")


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from None


def load_catalog(path) -> Dict[str, bytes]:
    """Catalog entries carry either inline ``content_b64`` or a ``size_bytes`` to synthesise."""
    entries = json.loads(Path(path).read_text())
    if not isinstance(entries, list):
        raise ValidationError("catalog must be a JSON list")
    out = {}
    for e in entries:
        name = e.get("c_name") if isinstance(e, dict) else None
        if not isinstance(name, str) or name in out:
            raise ValidationError(f"bad or duplicate c_name in catalog: {name!r}")
        if "content_b64" in e:
            out[name] = crypto_core.b64url_decode(e["content_b64"])
        elif isinstance(e.get("size_bytes"), int) and e["size_bytes"] > 0:
            seed = int.from_bytes(hashlib.sha256(name.encode()).digest()[:8], "big")
            out[name] = np.random.default_rng(seed).bytes(e["size_bytes"])
        else:
            raise ValidationError(f"catalog entry {name!r} needs content_b64 or size_bytes")
    return out


# -- subcommands ------------------------------------------------------------

def cmd_keygen(args) -> int:
    entropy = _entropy(args.seed)
    keyset = crypto_core.keygen(TreeParams(args.m), entropy)
    mac_key = crypto_core.gen_mac_key(entropy)
    keyset.save(args.out)
    mac_out = args.mac_out or mac_key_path(args.out)
    crypto_core.save_mac_key(mac_key, mac_out)
    print(f"wrote {len(keyset)} node keys to {args.out} and MAC key to {mac_out}",
          file=sys.stderr)
    return EXIT_OK


def cmd_catalog_gen(args) -> int:
    rng = np.random.default_rng(args.seed)
    entries = [{"c_name": sim.content_name(i),
                "content_b64": crypto_core.b64url_encode(rng.bytes(args.size))}
               for i in range(args.n)]
    Path(args.out).write_text(json.dumps(entries, indent=0) + "\n")
    print(f"wrote {args.n} contents of {args.size} bytes to {args.out}", file=sys.stderr)
    return EXIT_OK


def build_provider(cfg: dict) -> Provider:
    keyset = crypto_core.NodeKeySet.load(cfg["key_file"])
    if "m" in cfg and cfg["m"] != keyset.params.m:
        raise ValidationError(f"config m={cfg['m']} but key file has m={keyset.params.m}")
    mac_file = cfg.get("mac_key_file") or mac_key_path(cfg["key_file"])
    sp = Provider(keyset.params, keyset, crypto_core.load_mac_key(mac_file),
                  nonce_bits=cfg.get("nonce_bits", 128))
    if cfg.get("catalog_file"):
        sp.add_contents(load_catalog(cfg["catalog_file"]))
    return sp


def _interrupt(signum, frame):
    raise KeyboardInterrupt


def _serve(server: net.Server, what: str) -> int:
    print(f"{what} listening on {server.address}", file=sys.stderr, flush=True)
    signal.signal(signal.SIGTERM, _interrupt)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.httpd.server_close()
    return EXIT_OK


def cmd_run_sp(args) -> int:
    cfg = _read_json(args.config) if args.config else {}
    for key in ("listen", "key_file", "catalog_file", "m"):
        if getattr(args, key, None) is not None:
            cfg[key] = getattr(args, key)
    if "key_file" not in cfg:
        raise ValidationError("run-sp needs a key_file (config or --key-file)")
    sp = build_provider(cfg)
    return _serve(net.serve_provider(sp, cfg.get("listen", "127.0.0.1:8080")), "provider")


def cmd_run_cs(args) -> int:
    cfg = _read_json(args.config) if args.config else {}
    if args.capacity is not None:
        cfg["capacity_entries"] = args.capacity
    for key in ("listen", "upstream"):
        if getattr(args, key) is not None:
            cfg[key] = getattr(args, key)
    if "upstream" not in cfg or "capacity_entries" not in cfg:
        raise ValidationError("run-cs needs capacity_entries and upstream")
    cache = CacheServer(int(cfg["capacity_entries"]), net.HttpProviderLink(cfg["upstream"]))
    return _serve(net.serve_cache(cache, cfg.get("listen", "127.0.0.1:8081")), "cache server")


def cmd_fetch(args) -> int:
    ring = None
    if args.keyring:
        ring = KeyRing.from_json(_read_json(args.keyring))
        params = ring.params
        if args.t_user is not None and args.t_user != ring.t_user:
            raise ValidationError("--t-user disagrees with the key ring")
        t_user = ring.t_user
    else:
        if args.m is None or args.t_user is None:
            raise ValidationError("fetch needs --keyring or both --m and --t-user")
        params, t_user = TreeParams(args.m), args.t_user
    # decided before any connection is opened
    if eligible_node(params, t_user, args.t_curr) is None:
        raise RevokedError(f"access rights ended at period {t_user}, now {args.t_curr}")
    if not args.sp or not args.cs:
        raise ValidationError("fetch needs --sp and --cs addresses")
    sp = net.HttpProviderLink(args.sp)
    if ring is None:
        ring = ring_from_provider(sp, args.user_id, t_user, params)
    plaintext = Client(ring, sp, net.HttpCacheLink(args.cs),
                       nonce_bits=args.nonce_bits).request_content(args.name, args.t_curr)
    if args.out:
        Path(args.out).write_bytes(plaintext)
    else:
        sys.stdout.buffer.write(plaintext)
        sys.stdout.flush()
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = sim.SimConfig.load(args.config) if args.config else sim.SimConfig()
    overrides = {"seed": args.seed, "engine": args.engine, "mode": args.mode}
    if args.m is not None:
        overrides["m"] = args.m
    if args.capacity:
        overrides["capacities"] = args.capacity
    merged = cfg.to_json()
    merged.update({k: v for k, v in overrides.items() if v is not None})
    cfg = sim.SimConfig.from_json(merged)
    sim.print_seed(cfg)
    rows = sim.run_experiment(cfg)
    if args.out:
        Path(args.out).write_text(sim.write_csv(rows))
    else:
        sim.write_csv(rows, sys.stdout)
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chronocache", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("keygen", help="generate node keys and a MAC key")
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--mac-out")
    s.add_argument("--seed", type=_u64, help="deterministic keys (testing only)")
    s.set_defaults(func=cmd_keygen)

    s = sub.add_parser("catalog-gen", help="synthesise a catalog of pseudorandom contents")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--size", type=int, default=1024)
    s.add_argument("--seed", type=_u64, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_catalog_gen)

    s = sub.add_parser("run-sp", help="serve the provider API")
    s.add_argument("--config")
    s.add_argument("--listen")
    s.add_argument("--key-file", dest="key_file")
    s.add_argument("--catalog-file", dest="catalog_file")
    s.add_argument("--m", type=int)
    s.set_defaults(func=cmd_run_sp)

    s = sub.add_parser("run-cs", help="serve the cache API")
    s.add_argument("--config")
    s.add_argument("--listen")
    s.add_argument("--upstream")
    s.add_argument("--capacity", type=int)
    s.set_defaults(func=cmd_run_cs)

    s = sub.add_parser("fetch", help="fetch and decrypt one content")
    s.add_argument("--name", required=True)
    s.add_argument("--t-user", type=int)
    s.add_argument("--t-curr", type=int, required=True)
    s.add_argument("--m", type=int)
    s.add_argument("--keyring", help="JSON from POST /v1/keys")
    s.add_argument("--user-id", default="cli-user")
    s.add_argument("--sp")
    s.add_argument("--cs")
    s.add_argument("--nonce-bits", type=int, default=128, choices=(96, 128))
    s.add_argument("--out")
    s.set_defaults(func=cmd_fetch)

    s = sub.add_parser("simulate", help="run the hit-ratio experiment and emit CSV")
    s.add_argument("--config")
    s.add_argument("--seed", type=_u64)
    s.add_argument("--m", type=int)
    s.add_argument("--capacity", type=int, action="append")
    s.add_argument("--engine", choices=("protocol", "kernel"))
    s.add_argument("--mode", choices=("in-process", "networked"))
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=os.environ.get("CHRONOCACHE_LOG", "WARNING").upper(),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ChronoCacheError as exc:
        print(f"{exc.code}: {exc.message}", file=sys.stderr)
        return exit_code_for(exc)
    except (OSError, KeyError) as exc:
        print(f"VALIDATION: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
