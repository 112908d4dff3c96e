"""Experiment configuration: YAML schema, validation, and simulator assembly."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from . import data, learn
from .link import LinkParams, dbm_to_watts
from .orbital import GroundStation, OrbitPlane
from .protocol import PlaneState, SatelliteNode, Scheme
from .sparsify import ErrorState, SizeModel


class ValidationError(ValueError):
    """Raised when a configuration document is invalid."""


@dataclass
class ConstellationConfig:
    planes: int = 5
    sats_per_plane: int = 8
    altitude_km: float = 2000.0
    inclination_deg: float = 85.0


@dataclass
class GroundStationConfig:
    latitude_deg: float = 53.08  # Bremen
    longitude_deg: float = 8.80
    min_elevation_deg: float = 10.0


@dataclass
class LinkConfig:
    tx_power_dbm: float = 40.0
    gain_tx_dbi: float = 32.13
    gain_rx_dbi: float = 32.13
    bandwidth_hz: float = 500e6
    carrier_hz: float = 20e9
    noise_temp_k: float = 354.0


@dataclass
class TrainingConfig:
    learning_rate: float = 0.1
    local_epochs: int = 1
    batch_size: int = 32
    rounds: int = 500


@dataclass
class DatasetConfig:
    source: str = "synthetic"  # "synthetic" | "mnist"
    mnist_dir: str | None = None
    train_samples: int = 20000
    test_samples: int = 4000
    noise_std: float = 0.35


@dataclass
class ExperimentConfig:
    constellation: ConstellationConfig = field(default_factory=ConstellationConfig)
    ground_station: GroundStationConfig = field(default_factory=GroundStationConfig)
    link: LinkConfig = field(default_factory=LinkConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    scheme: str = "SIA"
    q: float = 0.01
    value_bits: int = 32
    compute_time_s: float = 1.0
    seed: int = 0
    output_dir: str = "runs"

    def validate(self):
        problems = []
        if self.scheme not in Scheme.__members__:
            problems.append(f"scheme must be one of {sorted(Scheme.__members__)}")
        if not 0 < self.q <= 1:
            problems.append("q must be in (0, 1]")
        if self.value_bits <= 0:
            problems.append("value_bits must be positive")
        if self.compute_time_s < 0:
            problems.append("compute_time_s must be non-negative")
        if self.constellation.planes < 1 or self.constellation.sats_per_plane < 2:
            problems.append("need at least one plane of at least two satellites")
        if self.dataset.source not in ("synthetic", "mnist"):
            problems.append("dataset.source must be 'synthetic' or 'mnist'")
        if self.dataset.source == "mnist" and not self.dataset.mnist_dir:
            problems.append("dataset.mnist_dir is required for dataset.source=mnist")
        if problems:
            raise ValidationError("; ".join(problems))
        return self


_SECTION_TYPES = {
    "constellation": ConstellationConfig,
    "ground_station": GroundStationConfig,
    "link": LinkConfig,
    "training": TrainingConfig,
    "dataset": DatasetConfig,
}


def _build_section(cls, raw: dict, path: str):
    known = cls.__dataclass_fields__
    unknown = set(raw) - set(known)
    if unknown:
        raise ValidationError(f"unknown keys in {path}: {sorted(unknown)}")
    return cls(**raw)


def config_from_dict(raw: dict) -> ExperimentConfig:
    raw = dict(raw or {})
    known = ExperimentConfig.__dataclass_fields__
    unknown = set(raw) - set(known)
    if unknown:
        raise ValidationError(f"unknown top-level keys: {sorted(unknown)}")
    kwargs = {}
    for key, value in raw.items():
        if key in _SECTION_TYPES:
            if not isinstance(value, dict):
                raise ValidationError(f"section '{key}' must be a mapping")
            kwargs[key] = _build_section(_SECTION_TYPES[key], value, key)
        else:
            kwargs[key] = value
    return ExperimentConfig(**kwargs).validate()


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path) as f:
        raw = yaml.safe_load(f)
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ValidationError("config document must be a mapping")
    return config_from_dict(raw)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return asdict(cfg)


def save_config(cfg: ExperimentConfig, path: str | Path):
    with open(path, "w") as f:
        yaml.safe_dump(config_to_dict(cfg), f, sort_keys=False)


def build_link_params(cfg: ExperimentConfig) -> LinkParams:
    return LinkParams(
        tx_power_w=dbm_to_watts(cfg.link.tx_power_dbm),
        gain_tx_dbi=cfg.link.gain_tx_dbi,
        gain_rx_dbi=cfg.link.gain_rx_dbi,
        bandwidth_hz=cfg.link.bandwidth_hz,
        carrier_hz=cfg.link.carrier_hz,
        noise_temp_k=cfg.link.noise_temp_k,
    )


def build_ground_station(cfg: ExperimentConfig) -> GroundStation:
    gs = cfg.ground_station
    return GroundStation(
        latitude_rad=math.radians(gs.latitude_deg),
        longitude_rad=math.radians(gs.longitude_deg),
        min_elevation_rad=math.radians(gs.min_elevation_deg),
    )


def build_planes_geometry(cfg: ExperimentConfig) -> list[OrbitPlane]:
    """Walker-star geometry: ascending nodes evenly spread over 180 degrees."""
    c = cfg.constellation
    return [
        OrbitPlane(
            altitude_m=c.altitude_km * 1e3,
            inclination_rad=math.radians(c.inclination_deg),
            raan_rad=p * math.pi / c.planes,
            num_sats=c.sats_per_plane,
            phase_offset_rad=0.0,
        )
        for p in range(c.planes)
    ]


def load_datasets(cfg: ExperimentConfig) -> tuple[data.Dataset, data.Dataset]:
    d = cfg.dataset
    if d.source == "mnist":
        base = Path(d.mnist_dir)
        train = data.load_mnist(
            _find_idx(base, "train-images"), _find_idx(base, "train-labels")
        )
        test = data.load_mnist(_find_idx(base, "t10k-images"), _find_idx(base, "t10k-labels"))
        return train, test
    train = data.synthetic_dataset(
        d.train_samples, seed=cfg.seed, noise_std=d.noise_std, blob_seed=cfg.seed
    )
    test = data.synthetic_dataset(
        d.test_samples, seed=cfg.seed + 1, noise_std=d.noise_std, blob_seed=cfg.seed
    )
    return train, test


def _find_idx(base: Path, stem: str) -> Path:
    for suffix in ("idx3-ubyte", "idx1-ubyte"):
        for ext in ("", ".gz"):
            candidate = base / f"{stem}-{suffix}{ext}"
            if candidate.exists():
                return candidate
    raise data.IngestionError(
        f"no IDX file matching '{stem}-*' under {base}; expected e.g. {stem}-idx3-ubyte[.gz]"
    )


def build_simulation(cfg: ExperimentConfig):
    """Assemble plane states, shards, and hyperparameters from a config."""
    train, test = load_datasets(cfg)
    num_classes = int(train.labels.max()) + 1
    feature_dim = train.features.shape[1]
    dim = learn.model_dim(feature_dim, num_classes)

    total_sats = cfg.constellation.planes * cfg.constellation.sats_per_plane
    shards = data.partition(train, total_sats, seed=cfg.seed)
    gs = build_ground_station(cfg)
    params = build_link_params(cfg)
    size_model = SizeModel(value_bits=cfg.value_bits, dim=dim)

    planes = []
    for plane_id, geometry in enumerate(build_planes_geometry(cfg)):
        k = cfg.constellation.sats_per_plane
        nodes = [
            SatelliteNode(
                sat_id=plane_id * k + i,
                dataset=shards[plane_id * k + i],
                error=ErrorState.zeros(dim),
            )
            for i in range(k)
        ]
        planes.append(
            PlaneState(
                plane_id=plane_id,
                plane=geometry,
                gs=gs,
                params=params,
                size_model=size_model,
                nodes=nodes,
                compute_time_s=cfg.compute_time_s,
                seed=cfg.seed,
            )
        )

    hp = learn.HyperParams(
        learning_rate=cfg.training.learning_rate,
        local_epochs=cfg.training.local_epochs,
        batch_size=cfg.training.batch_size,
        rounds=cfg.training.rounds,
        seed=cfg.seed,
    )
    w0 = learn.init_weights(feature_dim, num_classes)
    return planes, hp, w0, test, size_model
