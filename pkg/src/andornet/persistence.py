"""Saving and loading knowledge bases, plus the key-value store layer.

The KB file is versioned JSON: the entity/type registry, the links with
their predicates and role mappings, and the weight entries keyed by feature
triple strings.  Round-trips are lossless under canonical serialization.

Stores are plain string-key/string-value maps with the namespaces ``kb:``,
``weights:`` and ``graph:``.  The default is a single local JSON file; a
minimal wire client for redis-protocol servers is available when an
endpoint is configured.
"""

from __future__ import annotations

import json
import os
import socket
from typing import Mapping

from .calculus import Constant, Predicate, Variable
from .errors import FormatVersionError, StoreIOError
from .factors import WeightVector
from .implication import (
    ConjoinedImplicationLink,
    KnowledgeBase,
    PredicateImplicationLink,
    RoleSetMapping,
)

FORMAT_VERSION = 1


# -- JSON codecs ------------------------------------------------------------

def predicate_to_json(predicate: Predicate) -> dict:
    roles = {}
    for label, arg in predicate.role_items:
        if isinstance(arg, Variable):
            roles[label] = {"variable": arg.type_name}
        else:
            roles[label] = {"entity": arg.entity_id, "type": arg.type_name}
    return {"function": predicate.function_name, "roles": roles}


def predicate_from_json(data: Mapping) -> Predicate:
    roles = {}
    for label, spec in data["roles"].items():
        if "variable" in spec:
            roles[label] = Variable(spec["variable"])
        else:
            roles[label] = Constant(spec["entity"], spec["type"])
    return Predicate(data["function"], roles)


def link_to_json(link: ConjoinedImplicationLink) -> dict:
    return {
        "conclusion": predicate_to_json(link.conclusion),
        "premises": [
            {
                "predicate": predicate_to_json(clause.premise),
                "mapping": clause.mapping.as_dict(),
            }
            for clause in link.premises
        ],
    }


def link_from_json(data: Mapping) -> ConjoinedImplicationLink:
    conclusion = predicate_from_json(data["conclusion"])
    premises = [
        PredicateImplicationLink(
            predicate_from_json(entry["predicate"]),
            conclusion,
            RoleSetMapping(entry["mapping"]),
        )
        for entry in data["premises"]
    ]
    return ConjoinedImplicationLink(premises)


def record_to_json(kb: KnowledgeBase, weights: WeightVector) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "entities": dict(sorted(kb.entities.items())),
        "links": [link_to_json(l) for l in kb.links()],
        "weights": weights.to_string_dict(),
    }


def record_from_json(data: Mapping) -> tuple[KnowledgeBase, WeightVector]:
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatVersionError(
            f"unsupported knowledge base format version {version!r}, "
            f"expected {FORMAT_VERSION}"
        )
    kb = KnowledgeBase(entities=data.get("entities", {}))
    for entry in data.get("links", []):
        kb.add_link(link_from_json(entry))
    weights = WeightVector.from_string_dict(data.get("weights", {}))
    return kb, weights


def record_fingerprint(kb: KnowledgeBase, weights: WeightVector) -> str:
    """Canonical serialization, for equality checks across round trips."""
    return json.dumps(record_to_json(kb, weights), sort_keys=True)


def save_kb(path: str, kb: KnowledgeBase, weights: WeightVector):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record_to_json(kb, weights), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_kb(path: str) -> tuple[KnowledgeBase, WeightVector]:
    with open(path, encoding="utf-8") as fh:
        return record_from_json(json.load(fh))


# -- key-value stores ---------------------------------------------------------

class MemoryStore:
    """In-process store, mostly for tests."""

    def __init__(self):
        self._data: dict[str, str] = {}

    def put(self, key: str, value: str):
        self._data[key] = value

    def get(self, key: str) -> str | None:
        return self._data.get(key)


class FileStore:
    """All keys in one local JSON file; durable enough for a single process."""

    def __init__(self, path: str):
        self.path = path

    def _load(self) -> dict[str, str]:
        if not os.path.exists(self.path):
            return {}
        try:
            with open(self.path, encoding="utf-8") as fh:
                return json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise StoreIOError(f"cannot read store file {self.path}: {exc}", 1)

    def put(self, key: str, value: str):
        data = self._load()
        data[key] = value
        try:
            with open(self.path, "w", encoding="utf-8") as fh:
                json.dump(data, fh, sort_keys=True)
        except OSError as exc:
            raise StoreIOError(f"cannot write store file {self.path}: {exc}", 1)

    def get(self, key: str) -> str | None:
        return self._load().get(key)


class RedisStore:
    """Tiny GET/SET client for redis-protocol servers.

    Connects per operation; transient socket failures are retried and an
    exhausted retry budget raises with the attempt count.
    """

    def __init__(self, host: str, port: int, retries: int = 3, timeout: float = 2.0):
        self.host = host
        self.port = port
        self.retries = retries
        self.timeout = timeout

    def _command(self, *parts: str) -> bytes:
        payload = f"*{len(parts)}\r\n".encode()
        for part in parts:
            raw = part.encode()
            payload += f"${len(raw)}\r\n".encode() + raw + b"\r\n"
        last_error = None
        for attempt in range(1, self.retries + 1):
            try:
                with socket.create_connection(
                    (self.host, self.port), timeout=self.timeout
                ) as conn:
                    conn.sendall(payload)
                    return self._read_reply(conn)
            except OSError as exc:
                last_error = exc
        raise StoreIOError(
            f"store {self.host}:{self.port} unreachable: {last_error}", self.retries
        )

    @staticmethod
    def _read_line(conn) -> bytes:
        line = b""
        while not line.endswith(b"\r\n"):
            chunk = conn.recv(1)
            if not chunk:
                raise OSError("connection closed mid-reply")
            line += chunk
        return line[:-2]

    def _read_reply(self, conn) -> bytes:
        line = self._read_line(conn)
        kind, rest = line[:1], line[1:]
        if kind == b"+":
            return rest
        if kind == b"-":
            raise StoreIOError(f"store error reply: {rest.decode()}", 1)
        if kind == b"$":
            length = int(rest)
            if length < 0:
                return b""
            data = b""
            while len(data) < length + 2:
                chunk = conn.recv(length + 2 - len(data))
                if not chunk:
                    raise OSError("connection closed mid-bulk")
                data += chunk
            return data[:length]
        raise StoreIOError(f"unexpected reply {line!r}", 1)

    def put(self, key: str, value: str):
        self._command("SET", key, value)

    def get(self, key: str) -> str | None:
        reply = self._command("GET", key)
        return reply.decode() or None


def store_from_url(url: str):
    """redis://host:port selects the wire client; anything else is a file path."""
    if url.startswith("redis://"):
        rest = url[len("redis://"):]
        host, _, port = rest.partition(":")
        return RedisStore(host, int(port or 6379))
    return FileStore(url)


def save_to_store(store, name: str, kb: KnowledgeBase, weights: WeightVector):
    record = record_to_json(kb, weights)
    links_only = {k: v for k, v in record.items() if k != "weights"}
    store.put(f"kb:{name}", json.dumps(links_only, sort_keys=True))
    store.put(f"weights:{name}", json.dumps(record["weights"], sort_keys=True))


def load_from_store(store, name: str) -> tuple[KnowledgeBase, WeightVector]:
    links_raw = store.get(f"kb:{name}")
    if links_raw is None:
        raise StoreIOError(f"no record named {name!r} in store", 1)
    data = json.loads(links_raw)
    weights_raw = store.get(f"weights:{name}")
    data["weights"] = json.loads(weights_raw) if weights_raw else {}
    return record_from_json(data)


def verify_store_roundtrip(store, kb: KnowledgeBase, weights: WeightVector) -> bool:
    """Save then load; true when the record survives byte-for-byte."""
    save_to_store(store, "selftest", kb, weights)
    loaded_kb, loaded_weights = load_from_store(store, "selftest")
    return record_fingerprint(kb, weights) == record_fingerprint(
        loaded_kb, loaded_weights
    )
