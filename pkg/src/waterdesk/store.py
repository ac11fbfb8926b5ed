"""Embedded versioned storage engine.

Single process, in-memory, thread-safe. Snapshots are immutable; every
write to a dataset goes through its writer lock, so concurrent writers
to one dataset serialize while distinct datasets proceed in parallel.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager

from .coretypes import (
    SEED_STUDY_TYPES,
    AlgorithmEntry,
    DatasetDescriptor,
    DatasetVersion,
    Record,
)
from .errors import (
    DuplicateAlgorithm,
    DuplicateName,
    NoSuchVersion,
    StaleBase,
    UnknownAlgorithm,
    UnknownDataset,
    ValidationFailed,
)


class VersionedStore:
    def __init__(self):
        self._lock = threading.RLock()
        self._datasets: dict[str, DatasetDescriptor] = {}
        self._versions: dict[str, list[DatasetVersion]] = {}
        self._blobs: dict[str, dict] = {}  # digest -> values
        self._writer_locks: dict[str, threading.RLock] = {}
        self._algorithms: dict[str, AlgorithmEntry] = {}
        self.study_types = list(SEED_STUDY_TYPES)

    # -- datasets -------------------------------------------------------

    def create_dataset(self, descriptor: DatasetDescriptor, activity_id: str) -> DatasetVersion:
        with self._lock:
            for d in self._datasets.values():
                if d.project_id == descriptor.project_id and d.name == descriptor.name:
                    raise DuplicateName(
                        f"dataset name {descriptor.name!r} already used in project {descriptor.project_id}"
                    )
            if not descriptor.name:
                raise ValidationFailed("dataset name must be non-empty")
            if not any(st.code == descriptor.study_type for st in self.study_types):
                raise ValidationFailed(f"unknown study type {descriptor.study_type!r}")
            v1 = DatasetVersion(descriptor.dataset_id, 1, None, {}, activity_id)
            self._datasets[descriptor.dataset_id] = descriptor
            self._versions[descriptor.dataset_id] = [v1]
            self._writer_locks[descriptor.dataset_id] = threading.RLock()
            return v1

    def descriptor(self, dataset_id: str) -> DatasetDescriptor:
        with self._lock:
            try:
                return self._datasets[dataset_id]
            except KeyError:
                raise UnknownDataset(f"no dataset {dataset_id}")

    def list_descriptors(self):
        with self._lock:
            return list(self._datasets.values())

    @contextmanager
    def writer(self, dataset_id: str):
        """Take the dataset's single-writer slot."""
        with self._lock:
            if dataset_id not in self._writer_locks:
                raise UnknownDataset(f"no dataset {dataset_id}")
            lock = self._writer_locks[dataset_id]
        with lock:
            yield

    def head(self, dataset_id: str) -> DatasetVersion:
        with self._lock:
            if dataset_id not in self._versions:
                raise UnknownDataset(f"no dataset {dataset_id}")
            return self._versions[dataset_id][-1]

    def version(self, dataset_id: str, version) -> DatasetVersion:
        with self._lock:
            if dataset_id not in self._versions:
                raise UnknownDataset(f"no dataset {dataset_id}")
            chain = self._versions[dataset_id]
            if version == "head":
                return chain[-1]
            if not isinstance(version, int) or not 1 <= version <= len(chain):
                raise NoSuchVersion(f"dataset {dataset_id} has no version {version}")
            return chain[version - 1]

    def commit_index(self, dataset_id: str, base_version: int, record_index: dict,
                     new_blobs: dict, activity_id: str) -> DatasetVersion:
        """Append a new version whose index is given in full.

        ``new_blobs`` maps digest -> values for any content not already
        stored. Fails with StaleBase unless base_version is the head.
        """
        with self.writer(dataset_id):
            with self._lock:
                head = self._versions[dataset_id][-1]
                if head.version != base_version:
                    raise StaleBase(
                        f"base version {base_version} is not head {head.version} of {dataset_id}"
                    )
                for dg, values in new_blobs.items():
                    self._blobs.setdefault(dg, dict(values))
                nv = DatasetVersion(dataset_id, head.version + 1, head.version,
                                    dict(record_index), activity_id)
                self._versions[dataset_id].append(nv)
                return nv

    def records_of(self, dataset_id: str, version) -> list[Record]:
        snap = self.version(dataset_id, version)
        with self._lock:
            out = [Record(rid, dict(self._blobs[dg])) for rid, dg in snap.record_index.items()]
        out.sort(key=lambda r: r.record_id)
        return out

    def blob(self, dg: str) -> dict:
        with self._lock:
            return dict(self._blobs[dg])

    # -- algorithms -----------------------------------------------------

    def register_algorithm(self, entry: AlgorithmEntry) -> str:
        with self._lock:
            for e in self._algorithms.values():
                if e.name == entry.name and e.version == entry.version:
                    raise DuplicateAlgorithm(f"{entry.name} {entry.version} already registered")
            self._algorithms[entry.algo_id] = entry
            return entry.algo_id

    def algorithm(self, algo_id: str) -> AlgorithmEntry:
        with self._lock:
            try:
                return self._algorithms[algo_id]
            except KeyError:
                raise UnknownAlgorithm(f"no algorithm {algo_id}")

    def find_algorithm(self, name: str, version: str | None = None) -> AlgorithmEntry:
        with self._lock:
            matches = [e for e in self._algorithms.values()
                       if e.name == name and (version is None or e.version == version)]
        if not matches:
            raise UnknownAlgorithm(f"no algorithm named {name!r}")
        return sorted(matches, key=lambda e: e.version)[-1]

    def list_algorithms(self, kind: str | None = None):
        with self._lock:
            entries = list(self._algorithms.values())
        if kind is not None:
            entries = [e for e in entries if e.kind == kind]
        return sorted(entries, key=lambda e: (e.name, e.version))
