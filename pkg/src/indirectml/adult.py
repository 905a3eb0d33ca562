"""Census-income (Adult) ingestion: fetch, clean, and turn into a
label-proportion task.

The raw data are the two UCI files (train and test split, 48842 records
together).  Cleaning drops ``workclass`` and ``fnlwgt``, merges the two
capital columns into their difference ``capital-change``, collapses the
levels of ``race`` / ``education`` / ``marital-status`` /
``native-country`` through the fixed maps below, and removes rows with
missing values in any used attribute.  The level-grouping maps are
declared conventions of this package (chosen to hit the class counts
income 2, marital-status 3, education 8, occupation 14, relationship 6)
and are emitted into every run manifest.

Downloads are cached with sha256 verification: the first fetch records
the digest in a manifest next to the files, later reads verify against
it, and any pinned digest in KNOWN_SHA256 is enforced as well.
"""

from __future__ import annotations

import hashlib
import json
import os
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import (
    ChecksumMismatch,
    NetworkFailure,
    SchemaMismatch,
)
from .objective import WeakDataset
from .datagen import LabeledSample
from .transition import identity, llp_from_proportions
from .datagen import estimate_llp_statistics

DEFAULT_SOURCE_URL = "https://archive.ics.uci.edu/ml/machine-learning-databases/adult"
FILES = ("adult.data", "adult.test")

# Digests recorded on first successful fetch; pin values here to enforce
# a specific upstream revision.
KNOWN_SHA256: dict[str, str] = {}

RAW_COLUMNS = [
    "age",
    "workclass",
    "fnlwgt",
    "education",
    "education-num",
    "marital-status",
    "occupation",
    "relationship",
    "race",
    "sex",
    "capital-gain",
    "capital-loss",
    "hours-per-week",
    "native-country",
    "income",
]

EDUCATION_GROUPS = {
    "Preschool": "elementary",
    "1st-4th": "elementary",
    "5th-6th": "elementary",
    "7th-8th": "elementary",
    "9th": "some-highschool",
    "10th": "some-highschool",
    "11th": "some-highschool",
    "12th": "some-highschool",
    "HS-grad": "hs-grad",
    "Some-college": "some-college",
    "Assoc-acdm": "associate",
    "Assoc-voc": "associate",
    "Bachelors": "bachelors",
    "Masters": "masters",
    "Prof-school": "advanced",
    "Doctorate": "advanced",
}

MARITAL_GROUPS = {
    "Married-civ-spouse": "married",
    "Married-AF-spouse": "married",
    "Married-spouse-absent": "married",
    "Never-married": "never-married",
    "Divorced": "formerly-married",
    "Separated": "formerly-married",
    "Widowed": "formerly-married",
}

RACE_GROUPS = {
    "White": "white",
    "Black": "black",
    "Asian-Pac-Islander": "other",
    "Amer-Indian-Eskimo": "other",
    "Other": "other",
}

COUNTRY_GROUPS = {
    "United-States": "united-states",
    "Outlying-US(Guam-USVI-etc)": "united-states",
    "Puerto-Rico": "united-states",
    "Mexico": "latin-america",
    "Cuba": "latin-america",
    "Jamaica": "latin-america",
    "Honduras": "latin-america",
    "Dominican-Republic": "latin-america",
    "Ecuador": "latin-america",
    "Haiti": "latin-america",
    "Columbia": "latin-america",
    "Guatemala": "latin-america",
    "Nicaragua": "latin-america",
    "El-Salvador": "latin-america",
    "Trinadad&Tobago": "latin-america",
    "Peru": "latin-america",
    "Cambodia": "asia",
    "India": "asia",
    "Japan": "asia",
    "China": "asia",
    "Iran": "asia",
    "Philippines": "asia",
    "Vietnam": "asia",
    "Laos": "asia",
    "Taiwan": "asia",
    "Thailand": "asia",
    "Hong": "asia",
    "South": "asia",
    "England": "europe",
    "Germany": "europe",
    "Greece": "europe",
    "Italy": "europe",
    "Poland": "europe",
    "Portugal": "europe",
    "Ireland": "europe",
    "France": "europe",
    "Hungary": "europe",
    "Scotland": "europe",
    "Yugoslavia": "europe",
    "Holand-Netherlands": "europe",
}
COUNTRY_FALLBACK = "other-country"

GROUPING_MAPS = {
    "education": EDUCATION_GROUPS,
    "marital-status": MARITAL_GROUPS,
    "race": RACE_GROUPS,
    "native-country": COUNTRY_GROUPS,
}

NUMERIC_ATTRIBUTES = ("age", "education-num", "capital-change", "hours-per-week")
CATEGORICAL_ATTRIBUTES = (
    "education",
    "marital-status",
    "occupation",
    "relationship",
    "race",
    "sex",
    "native-country",
    "income",
)

# The fixed feature set used for every task built from this table.
FEATURE_ATTRIBUTES = (
    "age",
    "education-num",
    "race",
    "sex",
    "capital-change",
    "hours-per-week",
    "native-country",
)


@dataclass(frozen=True)
class AdultRaw:
    train_path: Path
    test_path: Path


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def default_cache_dir() -> Path:
    env = os.environ.get("INDIRECTML_CACHE")
    base = Path(env) if env else Path.home() / ".cache" / "indirectml"
    return base / "adult"


def fetch(source_url: str = DEFAULT_SOURCE_URL, cache_dir=None) -> AdultRaw:
    """Download (or reuse) the two raw files, verifying checksums.

    A cache hit never touches the network.  Corrupted cache entries
    raise ChecksumMismatch instead of being silently refetched.
    """
    cache = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    cache.mkdir(parents=True, exist_ok=True)
    manifest_path = cache / "manifest.json"
    manifest = (
        json.loads(manifest_path.read_text(encoding="utf-8"))
        if manifest_path.exists()
        else {}
    )
    paths = {}
    changed = False
    for fname in FILES:
        target = cache / fname
        if target.exists():
            digest = _sha256(target)
            expected = manifest.get(fname) or KNOWN_SHA256.get(fname)
            if expected is not None and digest != expected:
                raise ChecksumMismatch(
                    f"{target} has sha256 {digest}, expected {expected}"
                )
            if fname not in manifest:
                manifest[fname] = digest
                changed = True
        else:
            url = source_url.rstrip("/") + "/" + fname
            try:
                with urllib.request.urlopen(url, timeout=120) as resp:
                    payload = resp.read()
            except (urllib.error.URLError, OSError, ValueError) as e:
                raise NetworkFailure(f"could not download {url}: {e}") from e
            target.write_bytes(payload)
            digest = _sha256(target)
            pinned = KNOWN_SHA256.get(fname)
            if pinned is not None and digest != pinned:
                raise ChecksumMismatch(
                    f"fresh download of {fname} has sha256 {digest}, pinned {pinned}"
                )
            manifest[fname] = digest
            changed = True
        paths[fname] = target
    if changed:
        manifest_path.write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
    return AdultRaw(train_path=paths["adult.data"], test_path=paths["adult.test"])


def _read_raw(path: Path, skip_header_line: bool) -> pd.DataFrame:
    df = pd.read_csv(
        path,
        names=RAW_COLUMNS,
        sep=",",
        skipinitialspace=True,
        skiprows=1 if skip_header_line else 0,
        na_values="?",
        keep_default_na=False,
        engine="python",
    )
    if df.shape[1] != len(RAW_COLUMNS):
        raise SchemaMismatch(
            f"{path} has {df.shape[1]} columns, expected {len(RAW_COLUMNS)}"
        )
    return df


def preprocess(raw: AdultRaw) -> pd.DataFrame:
    """Clean both splits into one table with a ``split`` column.

    Deterministic: running twice over the same raw bytes produces an
    identical table.
    """
    frames = []
    for path, split, skip in (
        (raw.train_path, "train", False),
        (raw.test_path, "test", True),
    ):
        df = _read_raw(Path(path), skip_header_line=skip)
        df["split"] = split
        frames.append(df)
    df = pd.concat(frames, ignore_index=True)
    for col in df.columns:
        if df[col].dtype == object:
            df[col] = df[col].str.strip()
    df["income"] = df["income"].str.rstrip(".")
    df = df.drop(columns=["workclass", "fnlwgt"])
    df["capital-change"] = df["capital-gain"] - df["capital-loss"]
    df = df.drop(columns=["capital-gain", "capital-loss"])

    for col, mapping in (
        ("education", EDUCATION_GROUPS),
        ("marital-status", MARITAL_GROUPS),
        ("race", RACE_GROUPS),
    ):
        unknown = set(df[col].dropna()) - set(mapping)
        if unknown:
            raise SchemaMismatch(f"unknown {col} levels: {sorted(unknown)}")
        df[col] = df[col].map(mapping)
    df["native-country"] = df["native-country"].map(
        lambda v: v if pd.isna(v) else COUNTRY_GROUPS.get(v, COUNTRY_FALLBACK)
    )

    used = list(NUMERIC_ATTRIBUTES) + list(CATEGORICAL_ATTRIBUTES)
    df = df.dropna(subset=used).reset_index(drop=True)
    ordered = used + ["split"]
    return df[ordered]


def preprocess_cached(raw: AdultRaw, cache_dir=None) -> pd.DataFrame:
    """Preprocess with an on-disk CSV cache of the cleaned table.

    The cache key is the digest of the raw files, so a changed upstream
    invalidates the cached table automatically.
    """
    cache = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    cache.mkdir(parents=True, exist_ok=True)
    key = hashlib.sha256(
        (_sha256(Path(raw.train_path)) + _sha256(Path(raw.test_path))).encode()
    ).hexdigest()[:16]
    clean_path = cache / f"clean-{key}.csv"
    if clean_path.exists():
        return pd.read_csv(clean_path)
    table = preprocess(raw)
    table.to_csv(clean_path, index=False)
    return table


@dataclass(frozen=True)
class TabularSchema:
    """Which attribute to predict and which one defines the groups."""

    target: str
    grouping: str
    numeric_features: tuple[str, ...] = tuple(
        a for a in FEATURE_ATTRIBUTES if a in NUMERIC_ATTRIBUTES
    )
    categorical_features: tuple[str, ...] = tuple(
        a for a in FEATURE_ATTRIBUTES if a not in NUMERIC_ATTRIBUTES
    )

    def __post_init__(self):
        known = set(NUMERIC_ATTRIBUTES) | set(CATEGORICAL_ATTRIBUTES)
        if self.target == self.grouping:
            raise SchemaMismatch("target and grouping attribute must differ")
        for name, value in (("target", self.target), ("grouping", self.grouping)):
            if value not in known:
                raise SchemaMismatch(f"{name} attribute {value!r} not in the table")
            if value not in CATEGORICAL_ATTRIBUTES:
                raise SchemaMismatch(f"{name} attribute {value!r} must be categorical")
        features = set(self.numeric_features) | set(self.categorical_features)
        if self.target in features or self.grouping in features:
            raise SchemaMismatch(
                "feature list must not contain the target or grouping attribute"
            )

    @property
    def feature_attributes(self) -> tuple[str, ...]:
        return self.numeric_features + self.categorical_features


@dataclass(frozen=True)
class AdultTask:
    """One supervised task built from the cleaned table."""

    train: WeakDataset
    test: LabeledSample
    target_levels: tuple[str, ...]
    group_levels: tuple[str, ...]
    feature_names: tuple[str, ...]


def _levels(table: pd.DataFrame, col: str) -> list[str]:
    return sorted(map(str, table[col].unique()))


def _encode_features(
    schema: TabularSchema, table: pd.DataFrame, train_mask: np.ndarray
):
    """Standardized numerics plus one-hot categoricals; statistics and
    level sets come from the training split only."""
    blocks_train = []
    blocks_test = []
    names: list[str] = []
    test_mask = ~train_mask
    for col in schema.numeric_features:
        v = table[col].to_numpy(dtype=float)
        mean = v[train_mask].mean()
        std = v[train_mask].std()
        if std == 0.0:
            std = 1.0
        blocks_train.append(((v[train_mask] - mean) / std)[:, None])
        blocks_test.append(((v[test_mask] - mean) / std)[:, None])
        names.append(col)
    for col in schema.categorical_features:
        levels = sorted(map(str, table.loc[train_mask, col].unique()))
        v = table[col].astype(str).to_numpy()
        onehot = np.zeros((len(v), len(levels)))
        for li, level in enumerate(levels):
            onehot[v == level, li] = 1.0
        blocks_train.append(onehot[train_mask])
        blocks_test.append(onehot[test_mask])
        names.extend(f"{col}={level}" for level in levels)
    x_train = np.hstack(blocks_train)
    x_test = np.hstack(blocks_test)
    return x_train, x_test, tuple(names)


def build_llp_task(table: pd.DataFrame, schema: TabularSchema) -> AdultTask:
    """Training data with only group observations; test data keeps the
    true targets for accuracy evaluation.

    The transition matrix is the empirical label-proportion conditional
    estimated on the training split.
    """
    target_levels = _levels(table, schema.target)
    group_levels = _levels(table, schema.grouping)
    z = np.array([target_levels.index(str(v)) for v in table[schema.target]])
    g = np.array([group_levels.index(str(v)) for v in table[schema.grouping]])
    train_mask = (table["split"] == "train").to_numpy()
    props, priors = estimate_llp_statistics(
        z[train_mask], g[train_mask], n_classes=len(target_levels), n_groups=len(group_levels)
    )
    m = llp_from_proportions(props, priors)
    x_train, x_test, names = _encode_features(schema, table, train_mask)
    train = WeakDataset(
        x_train,
        g[train_mask],
        m,
        name=f"adult:{schema.target}|{schema.grouping}",
    )
    test = LabeledSample(features=x_test, true_targets=z[~train_mask])
    return AdultTask(
        train=train,
        test=test,
        target_levels=tuple(target_levels),
        group_levels=tuple(group_levels),
        feature_names=names,
    )


def build_direct_task(table: pd.DataFrame, schema: TabularSchema) -> AdultTask:
    """Fully-supervised baseline on the same features and splits."""
    target_levels = _levels(table, schema.target)
    z = np.array([target_levels.index(str(v)) for v in table[schema.target]])
    train_mask = (table["split"] == "train").to_numpy()
    x_train, x_test, names = _encode_features(schema, table, train_mask)
    train = WeakDataset(
        x_train,
        z[train_mask],
        identity(len(target_levels)),
        name=f"adult:{schema.target}|direct",
    )
    test = LabeledSample(features=x_test, true_targets=z[~train_mask])
    return AdultTask(
        train=train,
        test=test,
        target_levels=tuple(target_levels),
        group_levels=tuple(target_levels),
        feature_names=names,
    )
