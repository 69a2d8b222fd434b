"""Seeded generator of synthetic kit directories with a ground-truth manifest.

Generated kits are inert lookalikes: they carry the surface patterns the
detectors look for, plus near-miss decoys and label-correlated structure,
but contain no working credential-harvesting logic.
"""

from __future__ import annotations

import base64
import json
import os
import random
import re
import string
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional

from ..errors import KitIdMismatch
from ..evasion import EvasionTechnique
from ..obfuscation import ObfuscationTechnique

TECHNIQUES: tuple[str, ...] = tuple(t.value for t in EvasionTechnique) + tuple(
    t.value for t in ObfuscationTechnique
)
EVASION = frozenset(t.value for t in EvasionTechnique)
OBFUSCATION = frozenset(t.value for t in ObfuscationTechnique)

# per-kit technique rates observed on the 2245-kit reference corpus
REFERENCE_RATES = {
    "htaccess": 494 / 2245,
    "robots_txt": 433 / 2245,
    "php": 578 / 2245,
    "urldecode": 174 / 2245,
    "eval": 292 / 2245,
    "hex": 211 / 2245,
    "base64": 163 / 2245,
    "obfuscator": 34 / 2245,
}

DEFAULT_SIGNATURES = (
    ("zer0cool", 6.0),
    ("darkph1sher", 5.0),
    ("n0vaspam", 4.0),
    ("kitsmith", 3.0),
    ("ghost-r1der", 2.0),
    ("mr.sn0w", 1.5),
    ("bl4ckline", 1.0),
)

BRANDS = ("paypal", "apple", "amazon", "chase", "office", "netflix")
WRAPPERS = ("site", "www", "public_html", "login")
MANIFEST_NAME = "manifest.jsonl"
KITS_DIR = "kits"


@dataclass(frozen=True)
class CorpusSpec:
    kit_count: int = 100
    plant: Mapping[str, float] = field(default_factory=lambda: dict(REFERENCE_RATES))
    near_miss: float = 0.3
    signatures: tuple[tuple[str, float], ...] = DEFAULT_SIGNATURES
    signature_probability: float = 0.3
    file_count: tuple[int, int] = (3, 10)
    dir_depth: tuple[int, int] = (1, 3)
    correlation: float = 0.5

    def __post_init__(self) -> None:
        if self.kit_count < 1:
            raise ValueError("kit_count must be >= 1")
        unknown = set(self.plant) - set(TECHNIQUES)
        if unknown:
            raise ValueError(f"unknown techniques: {sorted(unknown)}")
        object.__setattr__(self, "plant", {t: float(self.plant.get(t, 0.0)) for t in TECHNIQUES})
        probs = list(self.plant.values()) + [self.near_miss, self.signature_probability, self.correlation]
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValueError("probabilities and correlation must lie in [0, 1]")
        for lo, hi in (self.file_count, self.dir_depth):
            if lo < 0 or hi < lo:
                raise ValueError("ranges must satisfy 0 <= min <= max")
        if self.signature_probability > 0 and not self.signatures:
            raise ValueError("signature pool is empty")
        if any(w <= 0 for _, w in self.signatures):
            raise ValueError("signature weights must be positive")

    @classmethod
    def uniform(cls, probability: float, **kw) -> "CorpusSpec":
        return cls(plant=dict.fromkeys(TECHNIQUES, probability), **kw)

    @classmethod
    def from_json(cls, data: dict) -> "CorpusSpec":
        kw = dict(data)
        if "signatures" in kw:
            sigs = kw["signatures"]
            items = sigs.items() if isinstance(sigs, dict) else sigs
            kw["signatures"] = tuple((str(n), float(w)) for n, w in items)
        for key in ("file_count", "dir_depth"):
            if key in kw:
                kw[key] = tuple(kw[key])
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ValueError(f"bad corpus spec: {exc}") from exc

    def to_json(self) -> dict:
        return {
            "kit_count": self.kit_count,
            "plant": dict(self.plant),
            "near_miss": self.near_miss,
            "signatures": [[n, w] for n, w in self.signatures],
            "signature_probability": self.signature_probability,
            "file_count": list(self.file_count),
            "dir_depth": list(self.dir_depth),
            "correlation": self.correlation,
        }


@dataclass(frozen=True)
class ManifestRecord:
    kit_id: str
    techniques: tuple[str, ...]
    near_misses: tuple[str, ...]
    signature: Optional[str]
    markers: tuple[str, ...]
    expected: dict

    @property
    def evasive(self) -> bool:
        return any(t in EVASION for t in self.techniques)

    @property
    def obfuscated(self) -> bool:
        return any(t in OBFUSCATION for t in self.techniques)

    def to_json(self) -> dict:
        return {
            "kit_id": self.kit_id,
            "techniques": list(self.techniques),
            "near_misses": list(self.near_misses),
            "signature": self.signature,
            "markers": list(self.markers),
            "expected": self.expected,
        }

    @classmethod
    def from_json(cls, d: dict) -> "ManifestRecord":
        return cls(d["kit_id"], tuple(d["techniques"]), tuple(d["near_misses"]), d.get("signature"),
                   tuple(d.get("markers", ())), dict(d.get("expected", {})))


# ------------------------------------------------------------------ templates


@lru_cache(maxsize=None)
def _template(name: str) -> str:
    return resources.files("kitscan.synth").joinpath("templates", name).read_text("utf-8")


@lru_cache(maxsize=None)
def template_index() -> dict:
    return json.loads(_template("index.json"))


_RE_PLACEHOLDER = re.compile(r"\{\{(\w+)\}\}")


class _Values:
    """Placeholder values drawn from the kit's generator."""

    def __init__(self, rng: random.Random):
        self.rng = rng

    def ip(self) -> str:
        r = self.rng
        return f"{r.randint(11, 223)}.{r.randint(0, 255)}.{r.randint(0, 255)}.{r.randint(1, 254)}"

    def cidr(self) -> str:
        r = self.rng
        return f"{r.randint(11, 223)}.{r.randint(0, 255)}.{r.randint(0, 255)}.0/24"

    def token(self, n: int = 8) -> str:
        return "".join(self.rng.choice(string.ascii_lowercase + string.digits) for _ in range(n))

    def word(self, lo: int = 4, hi: int = 9) -> str:
        return "".join(self.rng.choice(string.ascii_lowercase) for _ in range(self.rng.randint(lo, hi)))

    def value(self, key: str) -> str:
        r = self.rng
        if key in ("ip1", "ip2", "ip3"):
            return self.ip()
        if key == "cidr":
            return self.cidr()
        if key == "host1":
            return f"{self.word()}.{r.choice(('com', 'net', 'org'))}"
        if key == "brand":
            return r.choice(BRANDS)
        if key == "token":
            return self.token()
        if key == "pct":
            text = self.word(8, 20)
            return "".join(f"%{b:02X}" for b in text.encode())
        if key == "hex":
            return "".join(f"\\x{ord(c):02x}" for c in self.word(10, 16))
        if key == "hexname":
            return "".join(f"\\x{ord(c):02x}" for c in self.word(3, 6))
        if key == "b64":
            return base64.b64encode(r.randbytes(r.randint(96, 120))).decode("ascii")
        if key == "b64short":
            return base64.b64encode(r.randbytes(48)).decode("ascii")
        if key == "hexupper":
            return "".join(r.choice("0123456789ABCDEF") for _ in range(32))
        if key == "drop":
            return f"{self.word()}@example.test"
        if key == "tg":
            return f"{r.randint(10**8, 10**9 - 1)}:{self.token(20)}"
        if key == "next":
            return r.choice(("success.html", "thanks.html", "done.php"))
        if key == "title":
            return r.choice(("Sign in", "Account login", "Verify your account", "Secure area"))
        if key == "color":
            return "".join(r.choice("0123456789abcdef") for _ in range(6))
        raise KeyError(f"unknown placeholder {key!r}")


def render(name: str, values: _Values, fixed: Optional[dict] = None) -> str:
    """Fill a template; repeated placeholders share one value."""
    cache = dict(fixed or {})

    def sub(m: re.Match) -> str:
        key = m.group(1)
        if key not in cache:
            cache[key] = values.value(key)
        return cache[key]

    return _RE_PLACEHOLDER.sub(sub, _template(name))


# ------------------------------------------------------------------ generation

_KIND_BY_EXT = {".php": "nPhp", ".js": "nJs", ".txt": "nTxt", ".html": "nHtml", ".css": "nCss", ".png": "nMul"}
COUNT_KEYS = ("nFiles", "nDir", "nPhp", "nJs", "nTxt", "nHtml", "nCss", "nMul", "Otherfiles")


def _expected_counts(paths: Iterable[str]) -> dict:
    counts = dict.fromkeys(COUNT_KEYS, 0)
    dirs = set()
    for p in paths:
        counts["nFiles"] += 1
        counts[_KIND_BY_EXT.get(os.path.splitext(p)[1], "Otherfiles")] += 1
        parts = p.split("/")[:-1]
        dirs.update("/".join(parts[: i + 1]) for i in range(len(parts)))
    counts["nDir"] = len(dirs)
    return counts


def _generate_kit(spec: CorpusSpec, seed: int, index: int) -> tuple[ManifestRecord, dict[str, bytes]]:
    rng = random.Random(f"kitscan-synth/{seed}/{index}")
    vals = _Values(rng)
    kit_id = f"kit{index:05d}"
    index_doc = template_index()

    planted = [t for t in TECHNIQUES if rng.random() < spec.plant[t]]
    near_draws = [t for t in TECHNIQUES if rng.random() < spec.near_miss]
    near = [t for t in near_draws if t not in planted]
    evasive = any(t in EVASION for t in planted)
    obfuscated = any(t in OBFUSCATION for t in planted)

    hi, lo = (1 + spec.correlation) / 2, (1 - spec.correlation) / 2
    markers = []
    for name, label in (("admin_dir", evasive), ("extra_php", evasive), ("session", evasive), ("extra_txt", evasive),
                        ("config_dir", obfuscated), ("extra_js", obfuscated), ("cookie", obfuscated),
                        ("curl", obfuscated)):
        if rng.random() < (hi if label else lo):
            markers.append(name)

    signature = placement = None
    if spec.signatures and rng.random() < spec.signature_probability:
        names = [n for n, _ in spec.signatures]
        signature = rng.choices(names, weights=[w for _, w in spec.signatures])[0]
        placement = rng.choice(("comment", "readme", "html"))

    files: dict[str, str | bytes] = {}
    for t in planted:
        choice = rng.choice(index_doc["plant"][t])
        files[choice["path"]] = render(choice["template"], vals)
    for t in near:
        choice = rng.choice(index_doc["near_miss"][t])
        files[choice["path"]] = render(choice["template"], vals)

    body = [render("index_head.tmpl", vals)]
    if "session" in markers:
        body.append(render("marker_session.tmpl", vals))
    if "cookie" in markers:
        body.append(render("marker_cookie.tmpl", vals))
    if "curl" in markers:
        body.append(render("marker_curl.tmpl", vals))
    body.append(render(f"exfil_{rng.choice(('mail', 'telegram', 'write'))}.tmpl", vals))
    if placement == "comment":
        body.append(render("sig_comment.tmpl", vals, {"name": signature}))
    body.append(render("index_tail.tmpl", vals))
    files["index.php"] = "".join(body)
    files["style.css"] = render("style.tmpl", vals)
    if placement == "readme":
        files["readme.txt"] = render("sig_readme.tmpl", vals, {"name": signature})
    elif placement == "html":
        files["about.html"] = render("sig_html.tmpl", vals, {"name": signature})

    depth = rng.randint(*spec.dir_depth)
    asset_dir = "/".join(["assets", "img", "icons", "small", "x"][: max(depth, 1)])
    for i in range(rng.randint(*spec.file_count)):
        if rng.random() < 0.5:
            files[f"page{i}.html"] = render("page.tmpl", vals)
        else:
            files[f"{asset_dir}/image{i}.png"] = b"\x89PNG\r\n\x1a\n" + rng.randbytes(rng.randint(16, 64))

    if "admin_dir" in markers:
        files["admin/panel.php"] = render("admin_panel.tmpl", vals)
    if "extra_php" in markers:
        for i in range(rng.randint(2, 4)):
            files[f"inc/part{i}.php"] = render("extra_php.tmpl", vals)
    if "extra_txt" in markers:
        for i in range(rng.randint(1, 3)):
            files[f"docs/notes{i}.txt"] = render("notes.tmpl", vals)
    if "config_dir" in markers:
        files["config/settings.php"] = render("config_settings.tmpl", vals)
    if "extra_js" in markers:
        for i in range(rng.randint(2, 4)):
            files[f"js/check{i}.js"] = render("script.tmpl", vals)

    if rng.random() < 0.3:
        prefix = rng.choice(BRANDS + WRAPPERS) + "/"
        files = {prefix + p: c for p, c in files.items()}

    encoded = {p: c if isinstance(c, bytes) else c.encode("utf-8") for p, c in sorted(files.items())}
    record = ManifestRecord(
        kit_id, tuple(planted), tuple(near), signature, tuple(markers), _expected_counts(encoded)
    )
    return record, encoded


def generate_corpus(spec: CorpusSpec, seed: int, destination: os.PathLike | str) -> list[ManifestRecord]:
    """Write ``spec.kit_count`` kit directories under ``destination/kits`` plus ``manifest.jsonl``.

    Kit ``i`` draws from its own generator seeded by ``(seed, i)``, so output
    is identical for identical ``(spec, seed)``.
    """
    root = Path(destination)
    kits_root = root / KITS_DIR
    kits_root.mkdir(parents=True, exist_ok=True)
    records = []
    for i in range(spec.kit_count):
        record, files = _generate_kit(spec, seed, i)
        kit_dir = kits_root / record.kit_id
        for rel, data in files.items():
            target = kit_dir / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(data)
        records.append(record)
    write_manifest(records, root / MANIFEST_NAME)
    return records


def write_manifest(records: Iterable[ManifestRecord], path: os.PathLike | str) -> None:
    lines = [json.dumps(r.to_json(), sort_keys=True) for r in records]
    Path(path).write_text("".join(line + "\n" for line in lines), "utf-8")


def read_manifest(path: os.PathLike | str) -> list[ManifestRecord]:
    out = []
    for line in Path(path).read_text("utf-8").splitlines():
        if line.strip():
            out.append(ManifestRecord.from_json(json.loads(line)))
    return out


# ------------------------------------------------------------------ verification


@dataclass(frozen=True)
class Disagreement:
    kit_id: str
    technique: str
    expected: bool
    detected: bool

    def to_json(self) -> dict:
        return {"kit_id": self.kit_id, "technique": self.technique, "expected": self.expected,
                "detected": self.detected}


@dataclass(frozen=True)
class AgreementReport:
    agreement: dict[str, float]
    disagreements: tuple[Disagreement, ...]
    kit_count: int
    near_miss_only_kits: int
    near_miss_false_positives: int

    @property
    def perfect(self) -> bool:
        return not self.disagreements

    def to_json(self) -> dict:
        return {
            "schema_version": 1,
            "kit_count": self.kit_count,
            "agreement": self.agreement,
            "disagreements": [d.to_json() for d in self.disagreements],
            "near_miss_only_kits": self.near_miss_only_kits,
            "near_miss_false_positives": self.near_miss_false_positives,
        }


def verify_against_manifest(
    detected: Mapping[str, Iterable[str]], manifest: Iterable[ManifestRecord]
) -> AgreementReport:
    """Compare detected technique sets (kit_id -> technique values) with the manifest.

    The agreement rate of a technique is the fraction of kits whose detected
    flag equals the planted flag.
    """
    records = {r.kit_id: r for r in manifest}
    found = {k: frozenset(v) for k, v in detected.items()}
    if set(records) != set(found):
        missing = sorted(set(records) ^ set(found))
        raise KitIdMismatch(f"kit ids differ between scan results and manifest: {missing[:5]}")
    disagreements = []
    matches = dict.fromkeys(TECHNIQUES, 0)
    near_only = near_fp = 0
    for kit_id in sorted(records):
        rec, got = records[kit_id], found[kit_id]
        for t in TECHNIQUES:
            exp = t in rec.techniques
            if exp == (t in got):
                matches[t] += 1
            else:
                disagreements.append(Disagreement(kit_id, t, exp, t in got))
        if not rec.techniques and rec.near_misses:
            near_only += 1
            near_fp += bool(got)
    n = len(records)
    agreement = {t: (matches[t] / n if n else 1.0) for t in TECHNIQUES}
    return AgreementReport(agreement, tuple(disagreements), n, near_only, near_fp)
